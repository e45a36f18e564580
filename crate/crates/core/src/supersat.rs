//! Chain statistics over maximal chains, the averaging and counting
//! inequalities they satisfy, and the codegree-capped hypergraph builder.
//!
//! For a template `T` and a maximal chain `C`:
//! * `X(C) = Σ_{x∈C} log(1 + |T(x)|_β)`;
//! * `Y(C)` counts (pattern, embedding, coloring) triples: colored subchains
//!   of `C` inside `T` that realize a pattern, with multiplicity;
//! * `Y^x(C)` restricts `Y` to occurrences whose top element is `x`, with
//!   `x` carrying the pattern's top color;
//! * `Z^x_{c₁≻…≻c_i}(C)` counts colored subchains of order `i` topped at `x`
//!   whose colors read `c₁, …, c_i` from the top down.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::critical::omega_crit;
use crate::enumeration::MC_STREAMS;
use crate::error::{Error, Result};
use crate::lattice::{
    binomial, factorial, for_each_maximal_chain_below, middle_binomial, random_maximal_chain_below, Band,
    Element, MaximalChain,
};
use crate::patterns::{contains_all_chains_of_max_length, ColorId, ColorSet, ForbiddenFamily, PatternTrie};
use crate::templates::{log_weight, omega, Template, Vertex, WeightVector};

/// Largest number of maximal chains enumerated in exact mode.
pub const EXACT_CHAIN_BUDGET: u128 = 1_000_000;
pub const AMBIENT_EDGE_BUDGET: u64 = 100_000_000;
const SLACK_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupersatConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub q: f64,
    pub omega_crit: f64,
    pub k: usize,
    pub n: u32,
}

/// Least `Q ≥ 0` with `(s−1)^{i−1} ≤ Q + C(⌊(s−1)/m⌋, k−1)` for all
/// `1 ≤ i < k` and `1 ≤ s ≤ n+1`.
pub fn q_constant(m: usize, k: usize, n: u32) -> f64 {
    let mut q = 0.0f64;
    for i in 1..k {
        for s in 1..=n + 1 {
            let lhs = f64::from(s - 1).powi(i as i32 - 1);
            let rhs = binomial((s - 1) / m as u32, k as u32 - 1) as f64;
            q = q.max(lhs - rhs);
        }
    }
    q
}

pub fn constants(family: &ForbiddenFamily, beta: &WeightVector, n: u32) -> Result<SupersatConstants> {
    let wc = omega_crit(family, beta)?.omega_crit;
    if wc <= 0.0 {
        return Err(Error::Precondition("critical exponent is zero".into()));
    }
    let c3 = beta.total().ln_1p();
    let c4 = beta.min().ln_1p();
    let c1 = c4 / (c3 * 2.0 * wc);
    let c2 = (c4 / (c3 * c1)).min(wc);
    Ok(SupersatConstants { c1, c2, c3, c4, q: q_constant(family.m(), family.k(), n), omega_crit: wc, k: family.k(), n })
}

/// Suggested `δ` for a target surplus `α`: `α / (2k log(1 + Σβ))`.
pub fn delta_suggestion(alpha: f64, beta: &WeightVector, k: usize) -> f64 {
    alpha / (2.0 * k as f64 * beta.total().ln_1p())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ChainMode {
    /// Every maximal chain below the top element.
    Exact,
    /// Uniform random maximal chains from seeded streams.
    Sample { samples: u64, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub min: f64,
    pub max: f64,
    pub samples: u64,
    pub exact: bool,
}

#[derive(Clone, Copy)]
struct Acc<const K: usize> {
    sum: [f64; K],
    sq: [f64; K],
    min: [f64; K],
    max: [f64; K],
    count: u64,
}

impl<const K: usize> Acc<K> {
    fn new() -> Self {
        Acc { sum: [0.0; K], sq: [0.0; K], min: [f64::INFINITY; K], max: [f64::NEG_INFINITY; K], count: 0 }
    }

    fn push(&mut self, v: [f64; K]) {
        for (i, x) in v.into_iter().enumerate() {
            self.sum[i] += x;
            self.sq[i] += x * x;
            self.min[i] = self.min[i].min(x);
            self.max[i] = self.max[i].max(x);
        }
        self.count += 1;
    }

    fn merge(&mut self, o: &Self) {
        for i in 0..K {
            self.sum[i] += o.sum[i];
            self.sq[i] += o.sq[i];
            self.min[i] = self.min[i].min(o.min[i]);
            self.max[i] = self.max[i].max(o.max[i]);
        }
        self.count += o.count;
    }

    fn finish(&self, exact: bool) -> [Estimate; K] {
        let r = self.count as f64;
        std::array::from_fn(|i| {
            let mean = self.sum[i] / r;
            let std_err = if exact || self.count < 2 {
                0.0
            } else {
                (((self.sq[i] - r * mean * mean) / (r - 1.0)).max(0.0) / r).sqrt()
            };
            Estimate { mean, std_err, min: self.min[i], max: self.max[i], samples: self.count, exact }
        })
    }
}

/// Averages per-chain statistics over the maximal chains from `∅` to `top`.
/// Chains are passed bottom to top.
fn average<const K: usize>(
    top: Element,
    mode: ChainMode,
    f: impl Fn(&[Element]) -> [f64; K] + Sync,
) -> Result<[Estimate; K]> {
    match mode {
        ChainMode::Exact => {
            let total = factorial(top.rank());
            if total > EXACT_CHAIN_BUDGET {
                return Err(Error::budget("maximal chains", EXACT_CHAIN_BUDGET as u64, total.min(u128::from(u64::MAX)) as u64));
            }
            let mut acc = Acc::new();
            for_each_maximal_chain_below(top, |c| acc.push(f(c)));
            Ok(acc.finish(true))
        }
        ChainMode::Sample { samples, seed } => {
            if samples == 0 {
                return Err(Error::Parameter("samples must be positive".into()));
            }
            let parts: Vec<Acc<K>> = (0..MC_STREAMS)
                .into_par_iter()
                .map(|stream| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(stream);
                    let count = samples / MC_STREAMS + u64::from(stream < samples % MC_STREAMS);
                    let mut acc = Acc::new();
                    for _ in 0..count {
                        let c = random_maximal_chain_below(top, &mut rng);
                        acc.push(f(&c.elems));
                    }
                    acc
                })
                .collect();
            let mut acc = Acc::new();
            for p in &parts {
                acc.merge(p);
            }
            Ok(acc.finish(false))
        }
    }
}

struct Scorer<'a> {
    t: &'a Template,
    trie: PatternTrie,
}

impl<'a> Scorer<'a> {
    fn new(t: &'a Template, family: &ForbiddenFamily) -> Result<Scorer<'a>> {
        if t.m() != family.m() {
            return Err(Error::Parameter(format!("template has {} colors, family has {}", t.m(), family.m())));
        }
        Ok(Scorer { t, trie: PatternTrie::new(family) })
    }

    fn sets(&self, chain: &[Element]) -> Vec<ColorSet> {
        chain.iter().map(|&x| self.t.get(x)).collect()
    }

    fn y(&self, chain: &[Element]) -> u64 {
        self.trie.count_occurrences(&self.sets(chain))
    }

    fn y_top(&self, chain: &[Element]) -> u64 {
        let (&top, below) = chain.split_last().expect("chain is nonempty");
        self.trie.count_topped(&self.sets(below), self.t.get(top))
    }
}

fn x_of(t: &Template, beta: &WeightVector, chain: &[Element]) -> f64 {
    chain.iter().map(|&x| log_weight(t.get(x), beta)).sum()
}

fn z_top(t: &Template, colors: &[ColorId], chain: &[Element]) -> u64 {
    let (&top, below) = chain.split_last().expect("chain is nonempty");
    let Some((&c1, rest)) = colors.split_first() else {
        return 0;
    };
    if !t.get(top).contains(c1) {
        return 0;
    }
    let bottom_up: Vec<ColorId> = rest.iter().rev().copied().collect();
    let sets: Vec<ColorSet> = below.iter().map(|&x| t.get(x)).collect();
    crate::patterns::count_embeddings(&bottom_up, &sets)
}

/// `(X(C), Y(C))` for one maximal chain.
pub fn chain_x_y(t: &Template, family: &ForbiddenFamily, beta: &WeightVector, chain: &MaximalChain) -> Result<(f64, u64)> {
    let s = Scorer::new(t, family)?;
    Ok((x_of(t, beta, &chain.elems), s.y(&chain.elems)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub x_mean: f64,
    pub x_std_err: f64,
    pub y_mean: f64,
    pub y_std_err: f64,
    pub samples: u64,
    pub exact: bool,
}

/// `𝔼X` and `𝔼Y` over uniform maximal chains of `P([n])`.
pub fn chain_stats(t: &Template, family: &ForbiddenFamily, beta: &WeightVector, mode: ChainMode) -> Result<ChainStats> {
    beta.check_colors(family.m())?;
    let s = Scorer::new(t, family)?;
    let [x, y] = average(Element::full(t.n()), mode, |c| [x_of(t, beta, c), s.y(c) as f64])?;
    Ok(ChainStats {
        x_mean: x.mean,
        x_std_err: x.std_err,
        y_mean: y.mean,
        y_std_err: y.std_err,
        samples: x.samples,
        exact: x.exact,
    })
}

/// `𝔼Y^x` over uniform maximal chains below `x`.
pub fn y_x(t: &Template, family: &ForbiddenFamily, x: Element, mode: ChainMode) -> Result<Estimate> {
    let s = Scorer::new(t, family)?;
    let [e] = average(x, mode, |c| [s.y_top(c) as f64])?;
    Ok(e)
}

/// `𝔼Z^x` for colors `c₁, …, c_i` read from `x` downwards.
pub fn z_x(t: &Template, colors: &[ColorId], x: Element, mode: ChainMode) -> Result<Estimate> {
    if colors.is_empty() {
        return Err(Error::Parameter("at least one color is required".into()));
    }
    let [e] = average(x, mode, |c| [z_top(t, colors, c) as f64])?;
    Ok(e)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub omega_crit: f64,
    pub c3: f64,
    /// Largest `X(C) − C₃Y(C)` over the checked chains.
    pub max: f64,
    pub chains: u64,
    pub exact: bool,
}

/// Checks `X(C) − C₃Y(C) ≤ ω_crit` on the maximal chains of `P([n])`
/// visited by `mode`.
pub fn check_pointwise(
    t: &Template,
    family: &ForbiddenFamily,
    beta: &WeightVector,
    mode: ChainMode,
) -> Result<PointwiseReport> {
    beta.check_colors(family.m())?;
    let wc = omega_crit(family, beta)?.omega_crit;
    let c3 = beta.total().ln_1p();
    let s = Scorer::new(t, family)?;
    let [e] = average(Element::full(t.n()), mode, |c| [x_of(t, beta, c) - c3 * s.y(c) as f64])?;
    if e.max > wc + SLACK_TOLERANCE * wc.max(1.0) {
        return Err(Error::Counterexample(format!(
            "X(C) - C3*Y(C) reached {} above the critical exponent {wc}",
            e.max
        )));
    }
    Ok(PointwiseReport { omega_crit: wc, c3, max: e.max, chains: e.samples, exact: e.exact })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragelemReport {
    pub constants: SupersatConstants,
    pub alpha: f64,
    pub omega_t: f64,
    pub required: f64,
    pub threshold: f64,
    pub witness: Element,
    pub witness_ey: Estimate,
    pub scanned: usize,
    /// Largest `X(C) − C₃Y(C)` seen over the checked chains.
    pub pointwise_max: f64,
    pub chains_checked: u64,
}

/// Finds `x ∈ Supp(T)` with `𝔼Y^x ≥ C₁α` for a template heavier than
/// `(ω_crit + α)·C(n, ⌊n/2⌋)`, and checks `X(C) − C₃Y(C) ≤ ω_crit` on the
/// chains of `P([n])` visited by `mode`.
pub fn check_averagelem(
    t: &Template,
    family: &ForbiddenFamily,
    beta: &WeightVector,
    alpha: f64,
    mode: ChainMode,
) -> Result<AveragelemReport> {
    beta.check_colors(family.m())?;
    let n = t.n();
    let k = constants(family, beta, n)?;
    if !(alpha > 0.0 && alpha < k.c2) {
        return Err(Error::Precondition(format!("alpha = {alpha} must lie in (0, {})", k.c2)));
    }
    let omega_t = omega(t, beta);
    let required = (k.omega_crit + alpha) * middle_binomial(n);
    if omega_t < required {
        return Err(Error::Precondition(format!("template weight {omega_t} is below {required}")));
    }
    let pointwise = check_pointwise(t, family, beta, mode)?;
    let threshold = k.c1 * alpha;
    let support = t.support();
    for (i, &x) in support.iter().enumerate() {
        let e = y_x(t, family, x, mode)?;
        let certified = if e.exact { e.mean >= threshold * (1.0 - SLACK_TOLERANCE) } else { e.mean - 3.0 * e.std_err >= threshold };
        if certified {
            return Ok(AveragelemReport {
                constants: k,
                alpha,
                omega_t,
                required,
                threshold,
                witness: x,
                witness_ey: e,
                scanned: i + 1,
                pointwise_max: pointwise.max,
                chains_checked: pointwise.chains,
            });
        }
    }
    Err(Error::Counterexample(format!(
        "no element of the support has E[Y^x] >= {threshold} ({} scanned)",
        support.len()
    )))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundlemReport {
    pub q: f64,
    pub x: Element,
    pub colors: Vec<ColorId>,
    pub chains: u64,
    pub exact: bool,
    /// Smallest `Q + Y^x − Z^x` over the checked chains.
    pub min_slack: f64,
    pub max_z: f64,
    pub max_y: f64,
}

/// Checks `Z^x_{c₁≻…≻c_i}(C) ≤ Q + Y^x(C)` on the chains below `x`.
pub fn check_boundlem(
    t: &Template,
    family: &ForbiddenFamily,
    x: Element,
    colors: &[ColorId],
    mode: ChainMode,
) -> Result<BoundlemReport> {
    let mut r = check_boundlem_many(t, family, &[(x, colors.to_vec())], mode)?;
    Ok(r.pop().expect("one query"))
}

/// [`check_boundlem`] for several `(x, colors)` queries sharing one
/// template and family.
pub fn check_boundlem_many(
    t: &Template,
    family: &ForbiddenFamily,
    queries: &[(Element, Vec<ColorId>)],
    mode: ChainMode,
) -> Result<Vec<BoundlemReport>> {
    if !contains_all_chains_of_max_length(family) {
        return Err(Error::Precondition("family must contain every colored chain of its maximum length".into()));
    }
    let q = q_constant(family.m(), family.k(), t.n());
    let s = Scorer::new(t, family)?;
    let mut out = Vec::with_capacity(queries.len());
    for (x, colors) in queries {
        let x = *x;
        if colors.is_empty() || colors.len() > family.k() {
            return Err(Error::Parameter(format!("expected 1..={} colors, got {}", family.k(), colors.len())));
        }
        if let Some(c) = colors.iter().find(|c| c.0 == 0 || usize::from(c.0) > family.m()) {
            return Err(Error::Parameter(format!("color {c} outside 1..={}", family.m())));
        }
        let [slack, z, y] = average(x, mode, |c| {
            let y = s.y_top(c) as f64;
            let z = z_top(t, colors, c) as f64;
            [q + y - z, z, y]
        })?;
        if slack.min < 0.0 {
            return Err(Error::Counterexample(format!(
                "Z^x exceeds Q + Y^x by {} at x = {x:?}",
                -slack.min
            )));
        }
        out.push(BoundlemReport {
            q,
            x,
            colors: colors.clone(),
            chains: slack.samples,
            exact: slack.exact,
            min_slack: slack.min,
            max_z: z.max,
            max_y: y.max,
        });
    }
    Ok(out)
}

/// Edges of uniformities `2..=k`, each a chain of colored vertices sorted
/// bottom to top, with an index of codegrees `d(A)` for every nonempty
/// sub-tuple `A` of every edge.
#[derive(Clone, Debug)]
pub struct LeveledHypergraph {
    n: u32,
    m: usize,
    k: usize,
    edges: Vec<Vec<Vec<Vertex>>>,
    codegrees: Vec<HashMap<Vec<Vertex>, u64>>,
}

impl LeveledHypergraph {
    pub fn new(n: u32, m: usize, k: usize) -> LeveledHypergraph {
        LeveledHypergraph { n, m, k, edges: vec![Vec::new(); k + 1], codegrees: vec![HashMap::new(); k + 1] }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self, l: usize) -> &[Vec<Vertex>] {
        self.edges.get(l).map_or(&[], |e| e.as_slice())
    }

    pub fn edge_count(&self, l: usize) -> usize {
        self.edges(l).len()
    }

    pub fn total_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Number of edges of `H_l` containing the sorted tuple `a`.
    pub fn codegree(&self, l: usize, a: &[Vertex]) -> u64 {
        self.codegrees.get(l).and_then(|c| c.get(a)).copied().unwrap_or(0)
    }

    /// `Δ_j(H_l)`: the largest codegree of a `j`-element vertex set.
    pub fn max_codegree(&self, l: usize, j: usize) -> u64 {
        self.codegrees
            .get(l)
            .map_or(0, |c| c.iter().filter(|(a, _)| a.len() == j).map(|(_, &d)| d).max().unwrap_or(0))
    }

    fn insert(&mut self, edge: Vec<Vertex>) {
        let l = edge.len();
        for a in nonempty_subtuples(&edge) {
            *self.codegrees[l].entry(a).or_insert(0) += 1;
        }
        self.edges[l].push(edge);
    }

    fn would_fit(&self, edge: &[Vertex], cap: impl Fn(usize) -> f64) -> bool {
        let l = edge.len();
        nonempty_subtuples(edge).all(|a| (self.codegree(l, &a) + 1) as f64 <= cap(l - a.len()))
    }
}

impl Serialize for LeveledHypergraph {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let levels: BTreeMap<usize, &Vec<Vec<Vertex>>> =
            self.edges.iter().enumerate().filter(|(_, e)| !e.is_empty()).collect();
        let mut st = s.serialize_struct("LeveledHypergraph", 4)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("m", &self.m)?;
        st.serialize_field("k", &self.k)?;
        st.serialize_field("edges", &levels)?;
        st.end()
    }
}

fn nonempty_subtuples(edge: &[Vertex]) -> impl Iterator<Item = Vec<Vertex>> + '_ {
    (1u32..1 << edge.len()).map(move |mask| {
        edge.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &v)| v).collect()
    })
}

/// Visits every colored chain inside `t` that realizes a pattern of `trie`,
/// as vertices sorted bottom to top.
fn for_each_forbidden_chain(
    t: &Template,
    trie: &PatternTrie,
    mut f: impl FnMut(&[Vertex]) -> Result<()>,
) -> Result<()> {
    struct Walk<'a> {
        t: &'a Template,
        trie: &'a PatternTrie,
        full: u32,
        chain: Vec<Vertex>,
    }
    impl Walk<'_> {
        fn visit(&mut self, y: u32, node: usize, f: &mut dyn FnMut(&[Vertex]) -> Result<()>) -> Result<()> {
            for c in self.t.get(Element(y)).iter() {
                let Some(next) = self.trie.child(node, c) else { continue };
                self.chain.push(Vertex::new(Element(y), c));
                let r = self.descend(y, next, f);
                self.chain.pop();
                r?;
            }
            Ok(())
        }

        fn descend(&mut self, base: u32, node: usize, f: &mut dyn FnMut(&[Vertex]) -> Result<()>) -> Result<()> {
            if self.trie.is_terminal(node) {
                f(&self.chain)?;
            }
            let free = self.full & !base;
            let mut sub = free;
            while sub != 0 {
                self.visit(base | sub, node, f)?;
                sub = (sub - 1) & free;
            }
            Ok(())
        }
    }
    let full = Element::full(t.n()).0;
    let mut w = Walk { t, trie, full, chain: Vec::new() };
    for y in 0..=full {
        w.visit(y, trie.root(), &mut f)?;
    }
    Ok(())
}

/// All colored chains realizing a pattern with support in `band`.
pub fn ambient_hypergraph(n: u32, family: &ForbiddenFamily, band: Band) -> Result<LeveledHypergraph> {
    let host = Template::full(n, family.m(), band)?;
    let mut h = LeveledHypergraph::new(n, family.m(), family.k());
    let mut edges = Vec::new();
    for_each_forbidden_chain(&host, &PatternTrie::new(family), |e| {
        if edges.len() as u64 >= AMBIENT_EDGE_BUDGET {
            return Err(Error::budget("ambient edges", AMBIENT_EDGE_BUDGET, edges.len() as u64 + 1));
        }
        edges.push(e.to_vec());
        Ok(())
    })?;
    edges.sort_by(|a, b| candidate_key(a).cmp(&candidate_key(b)));
    for e in edges {
        h.insert(e);
    }
    Ok(h)
}

/// Every forbidden colored chain inside `t`, in candidate order.
pub(crate) fn forbidden_chains(t: &Template, trie: &PatternTrie) -> Result<Vec<Vec<Vertex>>> {
    let mut out = Vec::new();
    for_each_forbidden_chain(t, trie, |e| {
        out.push(e.to_vec());
        Ok(())
    })?;
    out.sort_by(|a, b| candidate_key(a).cmp(&candidate_key(b)));
    Ok(out)
}

fn candidate_key(e: &[Vertex]) -> (usize, Element, &[Vertex]) {
    (e.len(), e.last().expect("edges are nonempty").elem, e)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodegreeRow {
    pub l: usize,
    pub j: usize,
    pub max_codegree: u64,
    pub cap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BalancedReport {
    pub delta: f64,
    pub hypergraph: LeveledHypergraph,
    /// Uniformity that reached its edge target, if any.
    pub success: Option<usize>,
    /// `(l, e(H_l), δ^l n^{l−1} C(n, ⌊n/2⌋))` for each uniformity.
    pub edge_counts: Vec<(usize, usize, f64)>,
    pub codegrees: Vec<CodegreeRow>,
    /// Vertices whose singleton codegree cannot grow at some uniformity.
    pub saturated_singletons: Vec<Vertex>,
    pub candidates: usize,
    pub considered: usize,
}

/// Builds a sub-hypergraph of the forbidden chains inside `t` one edge at a
/// time, keeping `Δ_j(H_l) ≤ (δn)^{l−j}`, until some uniformity has
/// `δ^l n^{l−1} C(n, ⌊n/2⌋)` edges or the candidates run out.
pub fn build_balanced(t: &Template, family: &ForbiddenFamily, delta: f64) -> Result<BalancedReport> {
    if !contains_all_chains_of_max_length(family) {
        return Err(Error::Precondition("family must contain every colored chain of its maximum length".into()));
    }
    let band = Band::closed_middle_third(t.n());
    if !t.support_in_band(band) {
        return Err(Error::Precondition(format!(
            "template support must lie in ranks {}..={}",
            band.lo, band.hi
        )));
    }
    build_balanced_unchecked(t, family, &PatternTrie::new(family), delta)
}

/// [`build_balanced`] without the support and augmentation checks.
pub(crate) fn build_balanced_unchecked(
    t: &Template,
    family: &ForbiddenFamily,
    trie: &PatternTrie,
    delta: f64,
) -> Result<BalancedReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Parameter(format!("delta = {delta} must be positive")));
    }
    if t.m() != family.m() {
        return Err(Error::Parameter(format!("template has {} colors, family has {}", t.m(), family.m())));
    }
    let n = t.n();
    let k = family.k();
    let dn = delta * f64::from(n);
    let cap = |d: usize| dn.powi(d as i32);
    let target = |l: usize| delta.powi(l as i32) * f64::from(n).powi(l as i32 - 1) * middle_binomial(n);

    let candidates = forbidden_chains(t, trie)?;

    let mut h = LeveledHypergraph::new(n, family.m(), k);
    let mut success = None;
    let mut considered = 0;
    for e in &candidates {
        considered += 1;
        if h.would_fit(e, cap) {
            let l = e.len();
            h.insert(e.clone());
            if h.edge_count(l) as f64 >= target(l) {
                success = Some(l);
                break;
            }
        }
    }

    let codegrees = codegree_table(&h, delta);
    let mut saturated: Vec<Vertex> = Vec::new();
    for l in 2..=k {
        for (a, &d) in &h.codegrees[l] {
            if a.len() == 1 && (d + 1) as f64 > cap(l - 1) {
                saturated.push(a[0]);
            }
        }
    }
    saturated.sort();
    saturated.dedup();
    Ok(BalancedReport {
        delta,
        edge_counts: (2..=k).map(|l| (l, h.edge_count(l), target(l))).collect(),
        success,
        codegrees,
        saturated_singletons: saturated,
        candidates: candidates.len(),
        considered,
        hypergraph: h,
    })
}

/// `Δ_j(H_l)` next to its cap `(δn)^{l−j}`, read from the stored index.
pub fn codegree_table(h: &LeveledHypergraph, delta: f64) -> Vec<CodegreeRow> {
    let dn = delta * f64::from(h.n());
    let mut rows = Vec::new();
    for l in 2..=h.k() {
        for j in 1..=l {
            rows.push(CodegreeRow { l, j, max_codegree: h.max_codegree(l, j), cap: dn.powi((l - j) as i32) });
        }
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodegreeAudit {
    pub rows: Vec<CodegreeRow>,
    pub violations: usize,
}

/// Recomputes every codegree from the edge lists alone and compares it with
/// `(δn)^{l−j}`.
pub fn audit_codegrees(h: &LeveledHypergraph, delta: f64) -> CodegreeAudit {
    let dn = delta * f64::from(h.n());
    let mut rows = Vec::new();
    let mut violations = 0;
    for l in 2..=h.k() {
        let edges = h.edges(l);
        for j in 1..=l {
            let mut counts: BTreeMap<Vec<Vertex>, u64> = BTreeMap::new();
            for e in edges {
                for mask in 0u32..1 << l {
                    if mask.count_ones() as usize == j {
                        let a: Vec<Vertex> = (0..l).filter(|i| mask >> i & 1 == 1).map(|i| e[i]).collect();
                        *counts.entry(a).or_insert(0) += 1;
                    }
                }
            }
            let cap = dn.powi((l - j) as i32);
            violations += counts.values().filter(|&&d| d as f64 > cap).count();
            rows.push(CodegreeRow { l, j, max_codegree: counts.values().copied().max().unwrap_or(0), cap });
        }
    }
    CodegreeAudit { rows, violations }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionAudit {
    /// Most one-vertex extensions of a single prefix that were blocked.
    pub max_blocked: u64,
    /// `k · δn · 2^k`.
    pub bound: f64,
    pub prefixes: usize,
}

/// For every candidate left out of `h`, drops its bottom vertex to get a
/// prefix and counts, per prefix, the extensions blocked by a saturated
/// codegree.
pub fn audit_extensions(t: &Template, family: &ForbiddenFamily, h: &LeveledHypergraph, delta: f64) -> Result<ExtensionAudit> {
    let dn = delta * f64::from(h.n());
    let mut blocked: BTreeMap<Vec<Vertex>, u64> = BTreeMap::new();
    for_each_forbidden_chain(t, &PatternTrie::new(family), |e| {
        let l = e.len();
        if h.codegree(l, e) > 0 {
            return Ok(());
        }
        if !h.would_fit(e, |d| dn.powi(d as i32)) {
            *blocked.entry(e[1..].to_vec()).or_insert(0) += 1;
        }
        Ok(())
    })?;
    let k = family.k();
    Ok(ExtensionAudit {
        max_blocked: blocked.values().copied().max().unwrap_or(0),
        bound: k as f64 * dn * 2f64.powi(k as i32),
        prefixes: blocked.len(),
    })
}
