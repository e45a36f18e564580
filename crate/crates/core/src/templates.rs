//! Templates: an allowed color set for every element of `P([n])`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, binomial, Band, Element, MAX_N};
use crate::patterns::{is_violating_chain, ColorId, ColorSet, ForbiddenFamily};

/// Strictly positive color weights `(β_1, .., β_m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector {
    beta: Vec<f64>,
}

impl WeightVector {
    pub fn new(beta: Vec<f64>) -> Result<WeightVector> {
        if beta.is_empty() {
            return Err(Error::Weights("weights must be nonempty".into()));
        }
        if let Some((i, b)) = beta.iter().enumerate().find(|(_, b)| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::Weights(format!("beta[{i}] = {b}: weights must be positive")));
        }
        Ok(WeightVector { beta })
    }

    pub fn ones(m: usize) -> WeightVector {
        WeightVector { beta: vec![1.0; m] }
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn is_all_ones(&self) -> bool {
        self.beta.iter().all(|&b| b == 1.0)
    }

    #[inline]
    pub fn get(&self, c: ColorId) -> f64 {
        self.beta[c.index()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.beta
    }

    pub fn total(&self) -> f64 {
        self.beta.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.beta.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn check_colors(&self, m: usize) -> Result<()> {
        if self.beta.len() != m {
            return Err(Error::Weights(format!(
                "expected {m} weights, got {}",
                self.beta.len()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        WeightVector::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Vec<f64> {
        w.beta
    }
}

/// `|S|_β = Σ_{i ∈ S} β_i`.
pub fn weighted_size(set: ColorSet, beta: &WeightVector) -> f64 {
    set.iter().map(|c| beta.get(c)).sum()
}

/// `log(1 + |S|_β)`, the contribution of one element to ω.
#[inline]
pub fn log_weight(set: ColorSet, beta: &WeightVector) -> f64 {
    weighted_size(set, beta).ln_1p()
}

/// A colored vertex `(x, c)` of the ambient hypergraph on `P([n]) × [m]`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vertex {
    pub elem: Element,
    pub color: ColorId,
}

impl Vertex {
    pub fn new(elem: Element, color: ColorId) -> Vertex {
        Vertex { elem, color }
    }
}

impl Ord for Vertex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.elem, self.color).cmp(&(other.elem, other.color))
    }
}

impl PartialOrd for Vertex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?},{})", self.elem, self.color)
    }
}

/// Dense template over all `2^n` elements, indexed by mask.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TemplateRepr", into = "TemplateRepr")]
pub struct Template {
    n: u32,
    m: usize,
    sets: Vec<ColorSet>,
}

impl Template {
    pub fn empty(n: u32, m: usize) -> Result<Template> {
        if n > MAX_N {
            return Err(Error::Parameter(format!("n = {n} exceeds {MAX_N}")));
        }
        if m == 0 || m > crate::patterns::MAX_COLORS {
            return Err(Error::Parameter(format!("m = {m} out of range")));
        }
        Ok(Template { n, m, sets: vec![ColorSet::EMPTY; 1 << n] })
    }

    /// Every color on every element whose rank lies in `band`.
    pub fn full(n: u32, m: usize, band: Band) -> Result<Template> {
        let mut t = Template::empty(n, m)?;
        let all = ColorSet::all(m);
        for (mask, s) in t.sets.iter_mut().enumerate() {
            if band.contains_rank((mask as u32).count_ones()) {
                *s = all;
            }
        }
        Ok(t)
    }

    pub fn from_vertices(n: u32, m: usize, vertices: impl IntoIterator<Item = Vertex>) -> Result<Template> {
        let mut t = Template::empty(n, m)?;
        for v in vertices {
            t.check_elem(v.elem)?;
            if v.color.0 == 0 || usize::from(v.color.0) > m {
                return Err(Error::Parameter(format!("color {} outside 1..={m}", v.color)));
            }
            t.sets[v.elem.0 as usize].insert(v.color);
        }
        Ok(t)
    }

    fn check_elem(&self, x: Element) -> Result<()> {
        if x.0 >> self.n != 0 {
            return Err(Error::Parameter(format!("element {x:?} outside P([{}])", self.n)));
        }
        Ok(())
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, x: Element) -> ColorSet {
        self.sets[x.0 as usize]
    }

    pub fn set(&mut self, x: Element, s: ColorSet) {
        debug_assert!(s.is_subset(ColorSet::all(self.m)));
        self.sets[x.0 as usize] = s;
    }

    pub fn remove_vertex(&mut self, v: Vertex) {
        self.sets[v.elem.0 as usize].remove(v.color);
    }

    pub fn contains_vertex(&self, v: Vertex) -> bool {
        self.get(v.elem).contains(v.color)
    }

    /// Color sets indexed by mask.
    pub fn sets(&self) -> &[ColorSet] {
        &self.sets
    }

    /// `Supp(T)` in canonical order.
    pub fn support(&self) -> Vec<Element> {
        let mut s: Vec<Element> = (0..self.sets.len() as u32)
            .map(Element)
            .filter(|x| !self.get(*x).is_empty())
            .collect();
        s.sort();
        s
    }

    pub fn support_len(&self) -> usize {
        self.sets.iter().filter(|s| !s.is_empty()).count()
    }

    /// Number of colored vertices `Σ |T(x)|`.
    pub fn vertex_count(&self) -> usize {
        self.sets.iter().map(|s| s.len() as usize).sum()
    }

    /// Colored vertices in canonical order.
    pub fn vertices(&self) -> Vec<Vertex> {
        self.support()
            .into_iter()
            .flat_map(|x| self.get(x).iter().map(move |c| Vertex::new(x, c)))
            .collect()
    }

    pub fn is_subtemplate_of(&self, other: &Template) -> bool {
        self.n == other.n
            && self.sets.iter().zip(&other.sets).all(|(a, b)| a.is_subset(*b))
    }

    /// True when the colored subset `assignment` lies inside the template.
    pub fn contains_colored(&self, assignment: &[(Element, ColorId)]) -> bool {
        assignment.iter().all(|&(x, c)| self.get(x).contains(c))
    }

    pub fn support_in_band(&self, band: Band) -> bool {
        self.support().iter().all(|x| band.contains(*x))
    }
}

impl fmt::Debug for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for x in self.support() {
            m.entry(&x, &self.get(x));
        }
        m.finish()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateRepr {
    n: u32,
    m: usize,
    /// `(mask, colors)` for each support element, canonical order.
    support: Vec<(u32, Vec<u8>)>,
}

impl From<Template> for TemplateRepr {
    fn from(t: Template) -> Self {
        let support = t
            .support()
            .into_iter()
            .map(|x| (x.0, t.get(x).iter().map(|c| c.0).collect()))
            .collect();
        TemplateRepr { n: t.n, m: t.m, support }
    }
}

impl TryFrom<TemplateRepr> for Template {
    type Error = Error;
    fn try_from(r: TemplateRepr) -> Result<Template> {
        let mut vertices = Vec::new();
        for (mask, colors) in r.support {
            let x = Element::checked(mask, r.n)?;
            vertices.extend(colors.into_iter().map(|c| Vertex::new(x, ColorId(c))));
        }
        Template::from_vertices(r.n, r.m, vertices)
    }
}

/// `ω(β, T) = Σ_x log(1 + |T(x)|_β)`, natural log.
pub fn omega(t: &Template, beta: &WeightVector) -> f64 {
    t.sets.iter().filter(|s| !s.is_empty()).map(|&s| log_weight(s, beta)).sum()
}

/// `Π_{x ∈ Supp T} (1 + |T(x)|_β)`, the measure of everything inside `T`.
pub fn mu_contained_closed_form(t: &Template, beta: &WeightVector) -> f64 {
    t.sets
        .iter()
        .filter(|s| !s.is_empty())
        .map(|&s| 1.0 + weighted_size(s, beta))
        .product()
}

/// Exact `Π (1 + |T(x)|)` for unit weights.
pub fn count_contained(t: &Template) -> num_bigint::BigUint {
    t.sets
        .iter()
        .filter(|s| !s.is_empty())
        .fold(num_bigint::BigUint::from(1u32), |acc, s| acc * (1 + s.len()))
}

/// Whether every one-color-per-element selection from `T` avoids `family`.
///
/// Propagates, per pattern, the longest greedily matched prefix over all
/// chains ending at or below each element, using immediate predecessors
/// only. Ascending mask order visits every `x - bit` before `x`.
pub fn template_is_valid(t: &Template, family: &ForbiddenFamily) -> bool {
    let pats = family.patterns();
    let np = pats.len();
    let size = t.sets.len();
    let mut run = vec![0u8; size * np];
    let mut best = vec![0u8; np];
    for mask in 0..size {
        let x = Element(mask as u32);
        best.iter_mut().for_each(|b| *b = 0);
        for y in x.lower_covers() {
            let row = &run[y.0 as usize * np..(y.0 as usize + 1) * np];
            for (b, &r) in best.iter_mut().zip(row) {
                *b = (*b).max(r);
            }
        }
        let s = t.sets[mask];
        let row = &mut run[mask * np..(mask + 1) * np];
        for (p, (r, &b)) in row.iter_mut().zip(&best).enumerate() {
            let mut h = b;
            let bi = usize::from(b);
            if !s.is_empty() && bi < pats[p].len() && s.contains(pats[p].colors[bi]) {
                h += 1;
                if usize::from(h) == pats[p].len() {
                    return false;
                }
            }
            *r = h;
        }
    }
    true
}

/// Limits for [`template_validity_oracle`].
pub const ORACLE_MAX_SUPPORT: usize = 14;
pub const ORACLE_MAX_COLORINGS: u64 = 10_000_000;

/// Brute force: tries every coloring of `Supp(T)` against every maximal
/// chain of the support.
pub fn template_validity_oracle(t: &Template, family: &ForbiddenFamily) -> Result<bool> {
    let support = t.support();
    if support.len() > ORACLE_MAX_SUPPORT {
        return Err(Error::budget("oracle support size", ORACLE_MAX_SUPPORT as u64, support.len() as u64));
    }
    let mut colorings: u64 = 1;
    for &x in &support {
        colorings = colorings.saturating_mul(u64::from(t.get(x).len()) + 1);
    }
    if colorings > ORACLE_MAX_COLORINGS {
        return Err(Error::budget("oracle colorings", ORACLE_MAX_COLORINGS, colorings));
    }

    let chains = maximal_chains_of(&support);
    let options: Vec<Vec<ColorId>> = support.iter().map(|&x| t.get(x).iter().collect()).collect();
    let mut digits = vec![0usize; support.len()];
    loop {
        for chain in &chains {
            let colored: Vec<(Element, ColorId)> =
                chain.iter().map(|&i| (support[i], options[i][digits[i]])).collect();
            if is_violating_chain(&colored, family) {
                return Ok(false);
            }
        }
        let mut i = 0;
        loop {
            if i == digits.len() {
                return Ok(true);
            }
            digits[i] += 1;
            if digits[i] < options[i].len() {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Maximal chains of the subposet `elems` (given in canonical order), as
/// index lists bottom to top.
fn maximal_chains_of(elems: &[Element]) -> Vec<Vec<usize>> {
    let k = elems.len();
    // covers[i] = elements directly above i inside the subposet
    let covers: Vec<Vec<usize>> = (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| {
                    elems[i].is_proper_subset(elems[j])
                        && !(0..k).any(|z| {
                            elems[i].is_proper_subset(elems[z]) && elems[z].is_proper_subset(elems[j])
                        })
                })
                .collect()
        })
        .collect();
    let minimal: Vec<usize> =
        (0..k).filter(|&i| !(0..k).any(|j| elems[j].is_proper_subset(elems[i]))).collect();
    let mut out = Vec::new();
    let mut path = Vec::new();
    fn walk(i: usize, covers: &[Vec<usize>], path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        path.push(i);
        if covers[i].is_empty() {
            out.push(path.clone());
        } else {
            for &j in &covers[i] {
                walk(j, covers, path, out);
            }
        }
        path.pop();
    }
    for i in minimal {
        walk(i, &covers, &mut path, &mut out);
    }
    out
}

/// Nonempty color sets `(S_1, .., S_r)` placed bottom to top on a chain.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u8>>", into = "Vec<Vec<u8>>")]
pub struct ChainProfile {
    pub sets: Vec<ColorSet>,
}

impl ChainProfile {
    pub fn new(sets: Vec<ColorSet>) -> Result<ChainProfile> {
        if sets.iter().any(|s| s.is_empty()) {
            return Err(Error::Parameter("chain profile sets must be nonempty".into()));
        }
        Ok(ChainProfile { sets })
    }

    pub fn from_lists(lists: &[&[u8]]) -> Result<ChainProfile> {
        Self::new(lists.iter().map(|l| ColorSet::from_colors(l.iter().map(|&c| ColorId(c)))).collect())
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn omega(&self, beta: &WeightVector) -> f64 {
        self.sets.iter().map(|&s| log_weight(s, beta)).sum()
    }

    /// The profile laid along `∅ ⊂ {0} ⊂ {0,1} ⊂ ..` in `P([r-1])`.
    pub fn path_template(&self, m: usize) -> Result<Template> {
        let n = self.sets.len().saturating_sub(1) as u32;
        let mut t = Template::empty(n, m)?;
        let mut x = Element::EMPTY;
        for (i, &s) in self.sets.iter().enumerate() {
            if i > 0 {
                x = x.with_bit(i as u32 - 1);
            }
            t.set(x, s);
        }
        Ok(t)
    }
}

impl fmt::Debug for ChainProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.sets.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s:?}")?;
        }
        f.write_str(")")
    }
}

impl TryFrom<Vec<Vec<u8>>> for ChainProfile {
    type Error = Error;
    fn try_from(v: Vec<Vec<u8>>) -> Result<Self> {
        ChainProfile::new(v.into_iter().map(|l| ColorSet::from_colors(l.into_iter().map(ColorId))).collect())
    }
}

impl From<ChainProfile> for Vec<Vec<u8>> {
    fn from(p: ChainProfile) -> Self {
        p.sets.iter().map(|s| s.iter().map(|c| c.0).collect()).collect()
    }
}

/// `T(x) = S_{rank(x) - anchor + 1}` on ranks `anchor .. anchor + r - 1`.
pub fn layered_template(profile: &ChainProfile, n: u32, m: usize, anchor: u32) -> Result<Template> {
    let r = profile.len() as u32;
    if r == 0 || anchor + r - 1 > n {
        return Err(Error::Parameter(format!(
            "block [{anchor}, {}] outside [0, {n}]",
            anchor as i64 + r as i64 - 1
        )));
    }
    let mut t = Template::empty(n, m)?;
    for (j, &s) in profile.sets.iter().enumerate() {
        for x in lattice::layer(n, anchor + j as u32)? {
            t.set(x, s);
        }
    }
    Ok(t)
}

/// Anchor maximizing `Σ_j C(n, anchor + j) log(1 + |S_j|_β)`; ties go to
/// the smaller anchor.
pub fn best_anchor(profile: &ChainProfile, n: u32, beta: &WeightVector) -> Result<(u32, f64)> {
    let r = profile.len() as u32;
    if r == 0 || r > n + 1 {
        return Err(Error::Parameter(format!("profile length {r} does not fit in n = {n}")));
    }
    let mut best: Option<(u32, f64)> = None;
    for anchor in 0..=n + 1 - r {
        let w: f64 = profile
            .sets
            .iter()
            .enumerate()
            .map(|(j, &s)| binomial(n, anchor + j as u32) as f64 * log_weight(s, beta))
            .sum();
        match best {
            Some((_, b)) if w <= b + 1e-12 * b.abs().max(1.0) => {}
            _ => best = Some((anchor, w)),
        }
    }
    Ok(best.expect("at least one anchor"))
}
