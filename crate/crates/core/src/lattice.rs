//! Elements, layers and maximal chains of the Boolean lattice `P([n])`.

use std::cmp::Ordering;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest ground set handled anywhere in the crate.
pub const MAX_N: u32 = 24;

/// A subset of `{0, .., n-1}` stored as a bit mask.
///
/// Elements order canonically by `(rank, mask)`, which every module uses for
/// tie-breaking.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Element(pub u32);

impl Element {
    pub const EMPTY: Element = Element(0);

    pub fn full(n: u32) -> Element {
        Element(if n >= 32 { u32::MAX } else { (1u32 << n) - 1 })
    }

    #[inline]
    pub fn bits(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn rank(self) -> u32 {
        self.0.count_ones()
    }

    #[inline]
    pub fn is_subset(self, other: Element) -> bool {
        self.0 & !other.0 == 0
    }

    #[inline]
    pub fn is_proper_subset(self, other: Element) -> bool {
        self != other && self.is_subset(other)
    }

    #[inline]
    pub fn contains_bit(self, i: u32) -> bool {
        self.0 >> i & 1 == 1
    }

    #[inline]
    pub fn with_bit(self, i: u32) -> Element {
        Element(self.0 | 1 << i)
    }

    #[inline]
    pub fn without_bit(self, i: u32) -> Element {
        Element(self.0 & !(1 << i))
    }

    /// Indices of the set bits, ascending.
    pub fn bit_indices(self) -> impl Iterator<Item = u32> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let i = rest.trailing_zeros();
            rest &= rest - 1;
            Some(i)
        })
    }

    /// Elements covered by `self`: remove one bit.
    pub fn lower_covers(self) -> impl Iterator<Item = Element> {
        self.bit_indices().map(move |i| self.without_bit(i))
    }

    pub fn canonical_key(self) -> (u32, u32) {
        (self.rank(), self.0)
    }

    /// Rejects bits at positions `>= n`.
    pub fn checked(bits: u32, n: u32) -> Result<Element> {
        if n > MAX_N {
            return Err(Error::Parameter(format!("n = {n} exceeds {MAX_N}")));
        }
        if bits >> n != 0 {
            return Err(Error::Parameter(format!("mask {bits:#b} has bits outside [0, {n})")));
        }
        Ok(Element(bits))
    }
}

impl Ord for Element {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical_key().cmp(&other.canonical_key())
    }
}

impl PartialOrd for Element {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.bit_indices().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub fn is_proper_subset(x: Element, y: Element) -> bool {
    x.is_proper_subset(y)
}

fn check_n(n: u32) -> Result<()> {
    if n > MAX_N {
        Err(Error::Parameter(format!("n = {n} exceeds {MAX_N}")))
    } else {
        Ok(())
    }
}

/// All rank-`j` elements of `P([n])` in ascending mask order.
pub fn layer(n: u32, j: u32) -> Result<Vec<Element>> {
    check_n(n)?;
    if j > n {
        return Err(Error::Parameter(format!("layer {j} outside [0, {n}]")));
    }
    let mut out = Vec::with_capacity(binomial(n, j) as usize);
    if j == 0 {
        out.push(Element::EMPTY);
        return Ok(out);
    }
    // Gosper's hack walks masks of fixed popcount in increasing order.
    let limit = 1u64 << n;
    let mut v: u64 = (1u64 << j) - 1;
    while v < limit {
        out.push(Element(v as u32));
        let c = v & v.wrapping_neg();
        let r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
    Ok(out)
}

/// Every element of `P([n])` in canonical `(rank, mask)` order.
pub fn canonical_order(n: u32) -> Result<Vec<Element>> {
    check_n(n)?;
    let mut out = Vec::with_capacity(1usize << n);
    for j in 0..=n {
        out.extend(layer(n, j)?);
    }
    Ok(out)
}

/// Exact binomial coefficient; zero when `k > n`.
pub fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc
}

/// `C(n, floor(n/2))`, the width of `P([n])`.
pub fn middle_binomial(n: u32) -> f64 {
    binomial(n, n / 2) as f64
}

/// An inclusive interval of ranks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Band {
    pub lo: u32,
    pub hi: u32,
}

impl Band {
    pub fn new(lo: u32, hi: u32, n: u32) -> Result<Band> {
        if lo > hi || hi > n {
            return Err(Error::Parameter(format!("band [{lo}, {hi}] not inside [0, {n}]")));
        }
        Ok(Band { lo, hi })
    }

    pub fn full(n: u32) -> Band {
        Band { lo: 0, hi: n }
    }

    /// Ranks strictly between `n/3` and `2n/3`. `None` when no integer fits
    /// (e.g. `n = 3`).
    pub fn open_middle_third(n: u32) -> Option<Band> {
        let lo = n / 3 + 1;
        let hi = (2 * n).div_ceil(3).saturating_sub(1);
        (n > 0 && lo <= hi).then_some(Band { lo, hi })
    }

    /// Ranks in the closed interval `[n/3, 2n/3]`.
    pub fn closed_middle_third(n: u32) -> Band {
        Band { lo: n.div_ceil(3), hi: 2 * n / 3 }
    }

    #[inline]
    pub fn contains_rank(&self, r: u32) -> bool {
        self.lo <= r && r <= self.hi
    }

    pub fn contains(&self, x: Element) -> bool {
        self.contains_rank(x.rank())
    }

    /// Number of lattice elements with rank in the band.
    pub fn size(&self, n: u32) -> u128 {
        (self.lo..=self.hi.min(n)).map(|j| binomial(n, j)).sum()
    }
}

/// A maximal chain of an interval `[∅, top]`, listed bottom to top.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MaximalChain {
    pub elems: Vec<Element>,
}

impl MaximalChain {
    pub fn top(&self) -> Element {
        *self.elems.last().expect("chains are never empty")
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    /// Starts at ∅, each step adds exactly one bit, ends at `top`.
    pub fn is_maximal_below(&self, top: Element) -> bool {
        if self.elems.first() != Some(&Element::EMPTY) || self.elems.last() != Some(&top) {
            return false;
        }
        if self.elems.len() != top.rank() as usize + 1 {
            return false;
        }
        self.elems.windows(2).all(|w| {
            w[0].is_proper_subset(w[1]) && (w[1].0 ^ w[0].0).count_ones() == 1
        })
    }

    pub fn is_maximal(&self, n: u32) -> bool {
        self.is_maximal_below(Element::full(n))
    }

    fn from_bit_order(bits: &[u32]) -> MaximalChain {
        let mut elems = Vec::with_capacity(bits.len() + 1);
        let mut cur = Element::EMPTY;
        elems.push(cur);
        for &b in bits {
            cur = cur.with_bit(b);
            elems.push(cur);
        }
        MaximalChain { elems }
    }
}

/// Uniform random maximal chain of `P([n])`.
pub fn random_maximal_chain<R: Rng + ?Sized>(n: u32, rng: &mut R) -> MaximalChain {
    random_maximal_chain_below(Element::full(n), rng)
}

/// Uniform random maximal chain from ∅ up to `top`.
pub fn random_maximal_chain_below<R: Rng + ?Sized>(top: Element, rng: &mut R) -> MaximalChain {
    let mut bits: Vec<u32> = top.bit_indices().collect();
    bits.shuffle(rng);
    MaximalChain::from_bit_order(&bits)
}

/// Calls `visit` on every maximal chain below `top` (there are `rank(top)!`).
pub fn for_each_maximal_chain_below(top: Element, mut visit: impl FnMut(&[Element])) {
    let r = top.rank() as usize;
    let mut stack = vec![Element::EMPTY; r + 1];
    stack[r] = top;
    fn descend(level: usize, stack: &mut Vec<Element>, visit: &mut dyn FnMut(&[Element])) {
        if level == 0 {
            visit(stack);
            return;
        }
        let cur = stack[level];
        for lower in cur.lower_covers() {
            stack[level - 1] = lower;
            descend(level - 1, stack, visit);
        }
    }
    descend(r, &mut stack, &mut visit);
}

pub fn factorial(r: u32) -> u128 {
    (1..=u128::from(r)).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn small_layers() {
        assert_eq!(layer(2, 1).unwrap(), vec![Element(0b01), Element(0b10)]);
        assert_eq!(layer(0, 0).unwrap(), vec![Element::EMPTY]);
        assert_eq!(layer(4, 2).unwrap().len(), 6);
        assert!(layer(3, 4).is_err());
        assert!(layer(25, 1).is_err());
    }

    #[test]
    fn layer_sizes_sum_to_power_of_two() {
        for n in 0..=12 {
            let mut total = 0;
            for j in 0..=n {
                let l = layer(n, j).unwrap();
                assert_eq!(l.len() as u128, binomial(n, j));
                assert!(l.windows(2).all(|w| w[0].0 < w[1].0));
                assert!(l.iter().all(|x| x.rank() == j && x.0 >> n == 0));
                total += l.len();
            }
            assert_eq!(total, 1 << n);
        }
    }

    #[test]
    fn proper_subset() {
        assert!(is_proper_subset(Element(0b01), Element(0b11)));
        assert!(!is_proper_subset(Element(0b01), Element(0b01)));
        assert!(!is_proper_subset(Element(0b01), Element(0b10)));
    }

    #[test]
    fn canonical_order_is_sorted() {
        let order = canonical_order(5).unwrap();
        assert_eq!(order.len(), 32);
        assert!(order.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn bands() {
        assert_eq!(Band::open_middle_third(3), None);
        assert_eq!(Band::open_middle_third(6), Some(Band { lo: 3, hi: 3 }));
        assert_eq!(Band::open_middle_third(7), Some(Band { lo: 3, hi: 4 }));
        assert_eq!(Band::closed_middle_third(6), Band { lo: 2, hi: 4 });
        assert_eq!(Band::closed_middle_third(3), Band { lo: 1, hi: 2 });
        assert_eq!(Band::full(4).size(4), 16);
    }

    #[test]
    fn unique_chain_for_n1() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = random_maximal_chain(1, &mut rng);
        assert_eq!(c.elems, vec![Element(0), Element(1)]);
        let c = random_maximal_chain_below(Element::EMPTY, &mut rng);
        assert_eq!(c.elems, vec![Element::EMPTY]);
    }

    #[test]
    fn two_chains_equally_likely() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 10_000;
        let hits = (0..draws)
            .filter(|_| random_maximal_chain(2, &mut rng).elems[1] == Element(1))
            .count() as f64;
        // binomial(10^4, 1/2): sigma = 50
        assert!((hits - 5000.0).abs() <= 150.0, "hits = {hits}");
    }

    #[test]
    fn all_six_chains_observed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..1000 {
            let c = random_maximal_chain(3, &mut rng);
            assert!(c.is_maximal(3));
            seen.insert(c);
        }
        assert_eq!(seen.len(), 6);

        let x = Element(0b1011_0000).without_bit(7).with_bit(1);
        assert_eq!(x.rank(), 3);
        let mut below = std::collections::HashSet::new();
        for _ in 0..1000 {
            let c = random_maximal_chain_below(x, &mut rng);
            assert!(c.is_maximal_below(x));
            below.insert(c);
        }
        assert_eq!(below.len(), 6);
    }

    #[test]
    fn chi_square_uniformity_n4() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let samples = 100_000;
        let mut counts: HashMap<MaximalChain, u32> = HashMap::new();
        for _ in 0..samples {
            *counts.entry(random_maximal_chain(4, &mut rng)).or_default() += 1;
        }
        assert_eq!(counts.len(), 24);
        let expected = samples as f64 / 24.0;
        let stat: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 0.999 quantile of chi-square with 23 degrees of freedom.
        assert!(stat < 49.728_232_466_431_5, "chi2 = {stat}");
    }

    #[test]
    fn enumerated_chains_below() {
        let x = Element(0b1111);
        let mut count = 0;
        let mut seen = std::collections::HashSet::new();
        for_each_maximal_chain_below(x, |c| {
            let chain = MaximalChain { elems: c.to_vec() };
            assert!(chain.is_maximal_below(x));
            seen.insert(chain);
            count += 1;
        });
        assert_eq!(count, 24);
        assert_eq!(seen.len(), 24);
        let mut once = 0;
        for_each_maximal_chain_below(Element::EMPTY, |c| {
            assert_eq!(c, &[Element::EMPTY]);
            once += 1;
        });
        assert_eq!(once, 1);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(4, 5), 0);
        assert_eq!(binomial(24, 12), 2_704_156);
        assert_eq!(factorial(5), 120);
    }
}
