//! Forbidden families of colored chain patterns and the greedy subsequence
//! automaton that tracks how far each pattern has been matched.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper limit on the number of colors. Color sets are `u32` masks and
/// several routines enumerate all `2^m` subsets.
pub const MAX_COLORS: usize = 16;

/// Explored match states allowed before the automaton DPs give up.
pub const MAX_MATCH_STATES: usize = 1 << 21;

/// Most patterns [`augment_with_all_chains`] will materialize.
pub const MAX_AUGMENTED_PATTERNS: u128 = 1 << 22;

/// A color in `1..=m`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColorId(pub u8);

impl ColorId {
    #[inline]
    pub fn index(self) -> usize {
        usize::from(self.0) - 1
    }

    pub fn from_index(i: usize) -> ColorId {
        ColorId(i as u8 + 1)
    }
}

impl fmt::Debug for ColorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ColorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A subset of `{1..m}`; color `c` lives at bit `c - 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct ColorSet(pub u32);

impl ColorSet {
    pub const EMPTY: ColorSet = ColorSet(0);

    pub fn all(m: usize) -> ColorSet {
        ColorSet(((1u64 << m) - 1) as u32)
    }

    pub fn singleton(c: ColorId) -> ColorSet {
        ColorSet(1 << c.index())
    }

    pub fn from_colors(colors: impl IntoIterator<Item = ColorId>) -> ColorSet {
        ColorSet(colors.into_iter().fold(0, |acc, c| acc | 1 << c.index()))
    }

    #[inline]
    pub fn contains(self, c: ColorId) -> bool {
        self.0 >> c.index() & 1 == 1
    }

    #[inline]
    pub fn contains_index(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn insert(&mut self, c: ColorId) {
        self.0 |= 1 << c.index();
    }

    pub fn remove(&mut self, c: ColorId) {
        self.0 &= !(1 << c.index());
    }

    pub fn is_subset(self, other: ColorSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = ColorId> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(ColorId::from_index(i))
        })
    }
}

impl fmt::Debug for ColorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, c) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Display for ColorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Colors of a forbidden chain, read bottom to top.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChainPattern {
    pub colors: Vec<ColorId>,
}

impl ChainPattern {
    pub fn new(colors: impl IntoIterator<Item = u8>) -> ChainPattern {
        ChainPattern { colors: colors.into_iter().map(ColorId).collect() }
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn monochromatic_color(&self) -> Option<ColorId> {
        let first = *self.colors.first()?;
        self.colors.iter().all(|&c| c == first).then_some(first)
    }
}

impl fmt::Debug for ChainPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.colors.iter().enumerate() {
            if i > 0 {
                f.write_str("<")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// A collection of forbidden colored chains over colors `1..=m`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ForbiddenFamily {
    m: usize,
    patterns: Vec<ChainPattern>,
    k: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub is_sparse: bool,
    pub missing_colors: Vec<ColorId>,
}

impl ForbiddenFamily {
    /// Validates colors, lengths and duplicates. Pattern order is kept.
    pub fn new(m: usize, patterns: Vec<ChainPattern>) -> Result<ForbiddenFamily> {
        if m == 0 || m > MAX_COLORS {
            return Err(Error::Family(format!("color count m = {m} outside 1..={MAX_COLORS}")));
        }
        if patterns.is_empty() {
            return Err(Error::Family("no patterns given".into()));
        }
        let mut seen = HashSet::with_capacity(patterns.len());
        for (i, p) in patterns.iter().enumerate() {
            if p.len() < 2 {
                return Err(Error::Family(format!("patterns[{i}]: pattern length < 2")));
            }
            if let Some(c) = p.colors.iter().find(|c| c.0 == 0 || usize::from(c.0) > m) {
                return Err(Error::Family(format!("patterns[{i}]: color {c} out of range 1..={m}")));
            }
            if !seen.insert(p) {
                return Err(Error::Family(format!("patterns[{i}]: duplicate pattern {p:?}")));
            }
        }
        let k = patterns.iter().map(ChainPattern::len).max().unwrap_or(0);
        Ok(ForbiddenFamily { m, patterns, k })
    }

    pub fn from_lists(m: usize, lists: &[&[u8]]) -> Result<ForbiddenFamily> {
        Self::new(m, lists.iter().map(|l| ChainPattern::new(l.iter().copied())).collect())
    }

    /// The single-color family `{(1 < 1 < ... < 1)}` with `k` ones.
    pub fn monochromatic_chain(k: usize) -> Result<ForbiddenFamily> {
        Self::new(1, vec![ChainPattern::new(std::iter::repeat_n(1, k))])
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Longest pattern length.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn patterns(&self) -> &[ChainPattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn contains(&self, p: &ChainPattern) -> bool {
        self.patterns.contains(p)
    }

    pub fn sparsity_report(&self) -> SparsityReport {
        let mut covered = ColorSet::EMPTY;
        for p in &self.patterns {
            if let Some(c) = p.monochromatic_color() {
                covered.insert(c);
            }
        }
        let missing: Vec<ColorId> =
            (0..self.m).map(ColorId::from_index).filter(|&c| !covered.contains(c)).collect();
        SparsityReport { is_sparse: missing.is_empty(), missing_colors: missing }
    }

    pub fn require_sparse(&self) -> Result<()> {
        let r = self.sparsity_report();
        if r.is_sparse {
            Ok(())
        } else {
            Err(Error::NotSparse { missing: r.missing_colors })
        }
    }

    pub fn initial_state(&self) -> MatchState {
        MatchState(vec![0; self.patterns.len()])
    }

    /// One greedy step: each pattern whose next needed color lies in `set`
    /// advances by one. Saturated coordinates stay put.
    pub fn advance(&self, state: &MatchState, set: ColorSet) -> MatchState {
        let mut next = state.clone();
        self.advance_in_place(&mut next, set);
        next
    }

    pub fn advance_in_place(&self, state: &mut MatchState, set: ColorSet) {
        if set.is_empty() {
            return;
        }
        for (t, p) in state.0.iter_mut().zip(&self.patterns) {
            let ti = usize::from(*t);
            if ti < p.len() && set.contains(p.colors[ti]) {
                *t += 1;
            }
        }
    }

    pub fn is_saturated(&self, state: &MatchState) -> bool {
        state.0.iter().zip(&self.patterns).any(|(&t, p)| usize::from(t) == p.len())
    }

    /// `Π (|p| + 1)`, rendered as a decimal (saturates at `u128::MAX`).
    pub fn state_space_product(&self) -> String {
        let prod = self
            .patterns
            .iter()
            .try_fold(1u128, |acc, p| acc.checked_mul(p.len() as u128 + 1));
        match prod {
            Some(v) => v.to_string(),
            None => format!(">{}", u128::MAX),
        }
    }

    /// Stable SHA-256 of `m` and the pattern list, hex encoded.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.m as u64).to_le_bytes());
        for p in &self.patterns {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p.colors.iter().map(|c| c.0).collect::<Vec<u8>>());
        }
        hex::encode(h.finalize())
    }

    pub(crate) fn state_space_error(&self) -> Error {
        Error::StateSpace { limit: MAX_MATCH_STATES, product: self.state_space_product() }
    }
}

pub fn sparsity_report(family: &ForbiddenFamily) -> SparsityReport {
    family.sparsity_report()
}

/// Per-pattern count of greedily matched prefix symbols.
#[derive(Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct MatchState(pub Vec<u8>);

pub fn advance(family: &ForbiddenFamily, state: &MatchState, set: ColorSet) -> MatchState {
    family.advance(state, set)
}

/// Exhaustive check: does some pattern occur as a (not necessarily
/// contiguous) subsequence of `colors`?
pub fn is_violating_sequence(colors: &[ColorId], family: &ForbiddenFamily) -> bool {
    family.patterns().iter().any(|p| occurs_exhaustive(&p.colors, colors))
}

/// Same as [`is_violating_sequence`] for a chain given with its positions.
pub fn is_violating_chain(
    colored: &[(crate::lattice::Element, ColorId)],
    family: &ForbiddenFamily,
) -> bool {
    debug_assert!(colored.windows(2).all(|w| w[0].0.is_proper_subset(w[1].0)));
    let colors: Vec<ColorId> = colored.iter().map(|&(_, c)| c).collect();
    is_violating_sequence(&colors, family)
}

/// Tries every choice of `pattern.len()` positions.
fn occurs_exhaustive(pattern: &[ColorId], seq: &[ColorId]) -> bool {
    fn go(pattern: &[ColorId], seq: &[ColorId], start: usize) -> bool {
        let Some((&first, rest)) = pattern.split_first() else {
            return true;
        };
        (start..seq.len()).any(|i| seq[i] == first && go(rest, seq, i + 1))
    }
    go(pattern, seq, 0)
}

/// Longest color sequence over `1..=m` that contains no pattern of the
/// family as a subsequence.
pub fn longest_valid_length(family: &ForbiddenFamily) -> Result<usize> {
    family.require_sparse()?;
    let singletons: Vec<ColorSet> =
        (0..family.m()).map(|i| ColorSet::singleton(ColorId::from_index(i))).collect();
    let mut memo: HashMap<MatchState, usize> = HashMap::new();

    fn go(
        family: &ForbiddenFamily,
        sets: &[ColorSet],
        state: &MatchState,
        memo: &mut HashMap<MatchState, usize>,
    ) -> Result<usize> {
        if let Some(&v) = memo.get(state) {
            return Ok(v);
        }
        if memo.len() >= MAX_MATCH_STATES {
            return Err(family.state_space_error());
        }
        let mut best = 0;
        for &s in sets {
            let next = family.advance(state, s);
            if family.is_saturated(&next) {
                continue;
            }
            // Sparse families strictly advance some coordinate on every
            // nonempty step, so this recursion terminates.
            best = best.max(1 + go(family, sets, &next, memo)?);
        }
        memo.insert(state.clone(), best);
        Ok(best)
    }

    go(family, &singletons, &family.initial_state(), &mut memo)
}

/// `L(G)`: the shortest chain length no valid coloring can reach.
pub fn big_l(family: &ForbiddenFamily) -> Result<usize> {
    Ok(longest_valid_length(family)? + 1)
}

/// Adds every color sequence of length `k * m`. Valid colorings are
/// unchanged since any such chain already contains a monochromatic run of
/// length `k`.
pub fn augment_with_all_chains(family: &ForbiddenFamily) -> Result<ForbiddenFamily> {
    family.require_sparse()?;
    let m = family.m();
    let len = family.k() * m;
    let count = (m as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    if count > MAX_AUGMENTED_PATTERNS {
        return Err(Error::budget(
            "augmented pattern count",
            MAX_AUGMENTED_PATTERNS as u64,
            count.min(u128::from(u64::MAX)) as u64,
        ));
    }
    let existing: HashSet<&ChainPattern> = family.patterns().iter().collect();
    let mut extra = Vec::new();
    let mut digits = vec![0usize; len];
    'outer: loop {
        let p = ChainPattern { colors: digits.iter().map(|&d| ColorId::from_index(d)).collect() };
        if !existing.contains(&p) {
            extra.push(p);
        }
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < m {
                continue 'outer;
            }
            *d = 0;
        }
        break;
    }
    let mut patterns = family.patterns().to_vec();
    patterns.extend(extra);
    ForbiddenFamily::new(m, patterns)
}

/// True when every color sequence of length `k` is a pattern.
pub fn contains_all_chains_of_max_length(family: &ForbiddenFamily) -> bool {
    let k = family.k() as u32;
    let total = (family.m() as u128).checked_pow(k);
    let have = family.patterns().iter().filter(|p| p.len() == family.k()).count() as u128;
    total == Some(have)
}

/// Prefix tree over a family's patterns, used to count pattern occurrences
/// for all patterns at once.
#[derive(Clone, Debug)]
pub struct PatternTrie {
    m: usize,
    children: Vec<u32>,
    parent: Vec<u32>,
    color: Vec<u8>,
    terminal: Vec<bool>,
    deepest_first: Vec<u32>,
}

const NO_NODE: u32 = u32::MAX;

impl PatternTrie {
    pub fn new(family: &ForbiddenFamily) -> PatternTrie {
        let m = family.m();
        let mut t = PatternTrie {
            m,
            children: vec![NO_NODE; m],
            parent: vec![NO_NODE],
            color: vec![0],
            terminal: vec![false],
            deepest_first: Vec::new(),
        };
        let mut depth = vec![0usize];
        for p in family.patterns() {
            let mut node = 0usize;
            for &c in &p.colors {
                let slot = node * m + c.index();
                if t.children[slot] == NO_NODE {
                    let id = t.parent.len();
                    t.children[slot] = id as u32;
                    t.children.extend(std::iter::repeat_n(NO_NODE, m));
                    t.parent.push(node as u32);
                    t.color.push(c.0);
                    t.terminal.push(false);
                    depth.push(depth[node] + 1);
                }
                node = t.children[slot] as usize;
            }
            t.terminal[node] = true;
        }
        let mut order: Vec<u32> = (0..t.parent.len() as u32).collect();
        order.sort_by_key(|&v| std::cmp::Reverse(depth[v as usize]));
        t.deepest_first = order;
        t
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn child(&self, node: usize, c: ColorId) -> Option<usize> {
        let v = self.children[node * self.m + c.index()];
        (v != NO_NODE).then_some(v as usize)
    }

    pub fn is_terminal(&self, node: usize) -> bool {
        self.terminal[node]
    }

    fn embeddings(&self, sets: &[ColorSet]) -> Vec<u64> {
        let mut ways = vec![0u64; self.parent.len()];
        ways[0] = 1;
        for &s in sets {
            if s.is_empty() {
                continue;
            }
            for &v in &self.deepest_first {
                let v = v as usize;
                if v == 0 {
                    continue;
                }
                if s.contains(ColorId(self.color[v])) {
                    let p = self.parent[v] as usize;
                    ways[v] = ways[v].saturating_add(ways[p]);
                }
            }
        }
        ways
    }

    /// Number of (pattern, position tuple) pairs where the positions are
    /// increasing and each pattern color lies in the set at its position.
    pub fn count_occurrences(&self, sets: &[ColorSet]) -> u64 {
        let ways = self.embeddings(sets);
        (0..ways.len()).filter(|&v| self.terminal[v]).map(|v| ways[v]).sum()
    }

    /// Occurrences whose top position is an extra element with color set
    /// `top`, placed above all of `below`.
    pub fn count_topped(&self, below: &[ColorSet], top: ColorSet) -> u64 {
        if top.is_empty() {
            return 0;
        }
        let ways = self.embeddings(below);
        (1..ways.len())
            .filter(|&v| self.terminal[v] && top.contains(ColorId(self.color[v])))
            .map(|v| ways[self.parent[v] as usize])
            .sum()
    }
}

/// Embeddings of one pattern into a sequence of color sets.
pub fn count_embeddings(pattern: &[ColorId], sets: &[ColorSet]) -> u64 {
    let mut ways = vec![0u64; pattern.len() + 1];
    ways[0] = 1;
    for &s in sets {
        for j in (0..pattern.len()).rev() {
            if s.contains(pattern[j]) {
                ways[j + 1] = ways[j + 1].saturating_add(ways[j]);
            }
        }
    }
    ways[pattern.len()]
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// The 4-color family: every ordered pair except `3<1`, `4<1`, `4<2`.
    pub fn four_color_family() -> ForbiddenFamily {
        let allowed = [(3u8, 1u8), (4, 1), (4, 2)];
        let mut pats = Vec::new();
        for a in 1..=4u8 {
            for b in 1..=4u8 {
                if !allowed.contains(&(a, b)) {
                    pats.push(ChainPattern::new([a, b]));
                }
            }
        }
        ForbiddenFamily::new(4, pats).unwrap()
    }

    fn seq(cs: &[u8]) -> Vec<ColorId> {
        cs.iter().map(|&c| ColorId(c)).collect()
    }

    fn set(cs: &[u8]) -> ColorSet {
        ColorSet::from_colors(cs.iter().map(|&c| ColorId(c)))
    }

    #[test]
    fn four_color_has_13_patterns() {
        assert_eq!(four_color_family().len(), 13);
    }

    #[test]
    fn sparsity_examples() {
        let g = ForbiddenFamily::from_lists(1, &[&[1, 1]]).unwrap();
        assert!(g.sparsity_report().is_sparse);
        let g = ForbiddenFamily::from_lists(2, &[&[1, 2]]).unwrap();
        let r = g.sparsity_report();
        assert!(!r.is_sparse);
        assert_eq!(r.missing_colors, vec![ColorId(1), ColorId(2)]);
        assert!(four_color_family().sparsity_report().is_sparse);
    }

    #[test]
    fn family_validation() {
        assert!(matches!(ForbiddenFamily::from_lists(1, &[&[1]]), Err(Error::Family(e)) if e.contains("pattern length < 2")));
        assert!(ForbiddenFamily::from_lists(2, &[&[1, 3]]).is_err());
        assert!(ForbiddenFamily::from_lists(2, &[&[1, 0]]).is_err());
        assert!(ForbiddenFamily::from_lists(2, &[&[1, 2], &[1, 2]]).is_err());
        // supersequence-redundant copies are kept
        let g = ForbiddenFamily::from_lists(1, &[&[1, 1], &[1, 1, 1]]).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.k(), 3);
    }

    #[test]
    fn advance_examples() {
        let g = ForbiddenFamily::from_lists(1, &[&[1, 1]]).unwrap();
        let s0 = g.initial_state();
        assert_eq!(g.advance(&s0, ColorSet::EMPTY), s0);
        let s1 = g.advance(&s0, set(&[1]));
        assert_eq!(s1.0, vec![1]);
        let s2 = g.advance(&s1, set(&[1]));
        assert_eq!(s2.0, vec![2]);
        assert!(g.is_saturated(&s2));
        assert_eq!(g.advance(&s2, set(&[1])), s2);

        let g = four_color_family();
        let s = g.advance(&g.initial_state(), set(&[3, 4]));
        let s = g.advance(&s, set(&[1]));
        assert!(!g.is_saturated(&s));
    }

    #[test]
    fn four_color_brute_force() {
        let g = four_color_family();
        assert!(!is_violating_sequence(&seq(&[3, 1]), &g));
        assert!(is_violating_sequence(&seq(&[1, 1]), &g));
        for a in 1..=4 {
            for b in 1..=4 {
                for c in 1..=4 {
                    assert!(is_violating_sequence(&seq(&[a, b, c]), &g));
                }
            }
        }
        assert_eq!(longest_valid_length(&g).unwrap(), 2);
        assert_eq!(big_l(&g).unwrap(), 3);
    }

    #[test]
    fn monochromatic_l() {
        for k in 2..=6 {
            let g = ForbiddenFamily::monochromatic_chain(k).unwrap();
            assert_eq!(longest_valid_length(&g).unwrap(), k - 1);
            assert_eq!(big_l(&g).unwrap(), k);
        }
        let g = ForbiddenFamily::from_lists(2, &[&[1, 2]]).unwrap();
        assert!(matches!(longest_valid_length(&g), Err(Error::NotSparse { .. })));
        assert!(longest_valid_length(&g).unwrap_err().to_string().contains("not sparse"));
    }

    #[test]
    fn augmentation_examples() {
        let g = ForbiddenFamily::from_lists(1, &[&[1, 1]]).unwrap();
        assert_eq!(augment_with_all_chains(&g).unwrap(), g);
        let g = ForbiddenFamily::from_lists(1, &[&[1, 1, 1]]).unwrap();
        let a = augment_with_all_chains(&g).unwrap();
        assert_eq!(a, g);
        assert_eq!(augment_with_all_chains(&a).unwrap(), a);

        let g = four_color_family();
        let a = augment_with_all_chains(&g).unwrap();
        assert_eq!(a.len(), 13 + 65_536);
        assert_eq!(a.k(), 8);
        assert!(contains_all_chains_of_max_length(&a));
        assert_eq!(longest_valid_length(&a).unwrap(), 2);

        let dense = ForbiddenFamily::from_lists(2, &[&[1, 2]]).unwrap();
        assert!(augment_with_all_chains(&dense).is_err());
    }

    #[test]
    fn trie_counts_match_single_pattern_dp() {
        let g = four_color_family();
        let trie = PatternTrie::new(&g);
        let sets = [set(&[3, 4]), set(&[1, 2]), set(&[1])];
        let expect: u64 = g.patterns().iter().map(|p| count_embeddings(&p.colors, &sets)).sum();
        assert_eq!(trie.count_occurrences(&sets), expect);
        let topped: u64 = g
            .patterns()
            .iter()
            .filter(|p| sets[2].contains(*p.colors.last().unwrap()))
            .map(|p| count_embeddings(&p.colors[..p.len() - 1], &sets[..2]))
            .sum();
        assert_eq!(trie.count_topped(&sets[..2], sets[2]), topped);
    }

    fn all_sequences(m: u8, max_len: usize) -> Vec<Vec<ColorId>> {
        let mut out = vec![vec![]];
        let mut frontier = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for s in &frontier {
                for c in 1..=m {
                    let mut t: Vec<ColorId> = s.clone();
                    t.push(ColorId(c));
                    next.push(t);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    /// Longest prefix of `p` matchable as a subsequence, by brute force over
    /// every prefix length.
    fn max_prefix_exhaustive(p: &[ColorId], s: &[ColorId]) -> usize {
        (0..=p.len()).rev().find(|&l| occurs_exhaustive(&p[..l], s)).unwrap()
    }

    prop_compose! {
        fn arb_family()(m in 1usize..=3)
            (pats in prop::collection::vec(prop::collection::vec(1..=m as u8, 2..=3), 1..=6), m in Just(m))
            -> Option<ForbiddenFamily> {
            let mut uniq: Vec<Vec<u8>> = Vec::new();
            for p in pats { if !uniq.contains(&p) { uniq.push(p); } }
            ForbiddenFamily::new(m, uniq.into_iter().map(ChainPattern::new).collect()).ok()
        }
    }

    proptest! {
        #[test]
        fn greedy_matches_exhaustive(g in arb_family(), raw in prop::collection::vec(1u8..=3, 0..=6)) {
            let g = g.unwrap();
            let s: Vec<ColorId> = raw.into_iter().filter(|&c| usize::from(c) <= g.m()).map(ColorId).collect();
            let mut state = g.initial_state();
            for &c in &s {
                let next = g.advance(&state, ColorSet::singleton(c));
                prop_assert!(next.0.iter().zip(&state.0).all(|(a, b)| a >= b));
                state = next;
            }
            prop_assert_eq!(g.advance(&state, ColorSet::EMPTY), state.clone());
            prop_assert_eq!(g.is_saturated(&state), is_violating_sequence(&s, &g));
            for (t, p) in state.0.iter().zip(g.patterns()) {
                prop_assert_eq!(usize::from(*t), max_prefix_exhaustive(&p.colors, &s));
            }
        }

        #[test]
        fn pigeonhole_bound_on_l(g in arb_family()) {
            let g = g.unwrap();
            if g.sparsity_report().is_sparse {
                let l = big_l(&g).unwrap();
                prop_assert!(l <= g.m() * (g.k() - 1) + 1);
            }
        }
    }

    #[test]
    fn augmentation_preserves_valid_sequences() {
        let families = [
            ForbiddenFamily::from_lists(1, &[&[1, 1]]).unwrap(),
            ForbiddenFamily::from_lists(1, &[&[1, 1, 1]]).unwrap(),
            ForbiddenFamily::from_lists(2, &[&[1, 1], &[2, 2]]).unwrap(),
            ForbiddenFamily::from_lists(2, &[&[1, 1], &[2, 2, 2], &[2, 1]]).unwrap(),
            ForbiddenFamily::from_lists(2, &[&[1, 1, 1], &[2, 2, 2]]).unwrap(),
        ];
        for g in families {
            let a = augment_with_all_chains(&g).unwrap();
            let km = g.k() * g.m();
            for s in all_sequences(g.m() as u8, km) {
                assert_eq!(is_violating_sequence(&s, &g), is_violating_sequence(&s, &a), "{s:?}");
            }
        }
    }
}
