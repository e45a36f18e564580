//! Fingerprint containers for uniform hypergraphs and the branching process
//! that covers every valid colored subset by light templates.

use std::collections::{HashSet, VecDeque};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::omega_crit;
use crate::enumeration::{biguint_decimal, for_each_valid, neumaier_sum, random_coloring};
use crate::error::{Error, Result};
use crate::lattice::{middle_binomial, Band, Element};
use crate::patterns::{augment_with_all_chains, ColorId, ColorSet, ForbiddenFamily, PatternTrie};
use crate::supersat::{build_balanced_unchecked, forbidden_chains, LeveledHypergraph};
use crate::templates::{count_contained, omega, template_is_valid, Template, Vertex, WeightVector};

/// Upper limit on templates alive in one round of the branching process.
pub const MAX_FRONTIER: usize = 1_000_000;
pub const MAX_ROUNDS: usize = 10_000;
/// Largest number of colorings checked by exhaustive coverage verification.
pub const EXHAUSTIVE_COVERAGE_LIMIT: f64 = 1e6;

/// An `l`-uniform hypergraph on a fixed list of colored vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniformHypergraph {
    l: usize,
    vertices: Vec<Vertex>,
    edges: Vec<Vec<u32>>,
}

impl UniformHypergraph {
    /// Vertices are sorted; every edge must have `l` distinct vertices from
    /// the list.
    pub fn new(l: usize, mut vertices: Vec<Vertex>, edges: &[Vec<Vertex>]) -> Result<UniformHypergraph> {
        if l == 0 {
            return Err(Error::Parameter("uniformity must be positive".into()));
        }
        vertices.sort();
        vertices.dedup();
        let mut idx = Vec::with_capacity(edges.len());
        for e in edges {
            let mut ix = Vec::with_capacity(e.len());
            for v in e {
                let i = vertices
                    .binary_search(v)
                    .map_err(|_| Error::Parameter(format!("edge vertex {v:?} is not a vertex")))?;
                ix.push(i as u32);
            }
            ix.sort_unstable();
            ix.dedup();
            if ix.len() != l {
                return Err(Error::Parameter(format!("edge {e:?} does not have {l} distinct vertices")));
            }
            idx.push(ix);
        }
        idx.sort();
        idx.dedup();
        Ok(UniformHypergraph { l, vertices, edges: idx })
    }

    /// The uniformity-`l` part of `h`, on the vertex set `vertices`.
    pub fn from_level(h: &LeveledHypergraph, l: usize, vertices: Vec<Vertex>) -> Result<UniformHypergraph> {
        UniformHypergraph::new(l, vertices, h.edges(l))
    }

    pub fn uniformity(&self) -> usize {
        self.l
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = Vec<Vertex>> + '_ {
        self.edges.iter().map(|e| e.iter().map(|&i| self.vertices[i as usize]).collect())
    }

    fn index_set(&self, set: &[Vertex]) -> Result<Vec<bool>> {
        let mut mark = vec![false; self.vertices.len()];
        for v in set {
            let i = self
                .vertices
                .binary_search(v)
                .map_err(|_| Error::Parameter(format!("{v:?} is not a vertex of the hypergraph")))?;
            mark[i] = true;
        }
        Ok(mark)
    }

    pub fn is_independent(&self, set: &[Vertex]) -> Result<bool> {
        let mark = self.index_set(set)?;
        Ok(!self.edges.iter().any(|e| e.iter().all(|&i| mark[i as usize])))
    }

    fn degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.vertices.len()];
        for e in &self.edges {
            for &i in e {
                d[i as usize] += 1;
            }
        }
        d
    }
}

/// One state of the fingerprint algorithm: available vertices, the current
/// link hypergraph (edges restricted to what is left), and the fingerprint.
#[derive(Clone)]
struct StepState {
    available: Vec<bool>,
    link: Vec<Vec<u32>>,
    fingerprint: Vec<u32>,
    uniformity: usize,
}

enum Decision {
    Done,
    Select(u32),
}

struct Stepper<'a> {
    h: &'a UniformHypergraph,
    limit: usize,
}

impl Stepper<'_> {
    fn start(&self) -> StepState {
        StepState {
            available: vec![true; self.h.vertices.len()],
            link: self.h.edges.clone(),
            fingerprint: Vec::new(),
            uniformity: self.h.l,
        }
    }

    /// Drops dead link edges and either finishes the run (returning `Done`)
    /// or names the next vertex to query.
    fn next(&self, s: &mut StepState) -> Decision {
        s.link.retain(|e| e.iter().all(|&i| s.available[i as usize]));
        if s.fingerprint.len() >= self.limit || s.link.is_empty() {
            return Decision::Done;
        }
        if s.uniformity == 1 {
            for e in &s.link {
                s.available[e[0] as usize] = false;
            }
            s.link.clear();
            return Decision::Done;
        }
        let mut deg = vec![0u32; s.available.len()];
        for e in &s.link {
            for &i in e {
                deg[i as usize] += 1;
            }
        }
        let mut best = 0usize;
        for i in 1..deg.len() {
            if deg[i] > deg[best] {
                best = i;
            }
        }
        Decision::Select(best as u32)
    }

    fn take(&self, s: &mut StepState, u: u32) {
        s.fingerprint.push(u);
        s.available[u as usize] = false;
        s.link = s
            .link
            .iter()
            .filter(|e| e.contains(&u))
            .map(|e| e.iter().copied().filter(|&i| i != u).collect())
            .collect();
        s.uniformity -= 1;
    }

    fn skip(&self, s: &mut StepState, u: u32) {
        s.available[u as usize] = false;
    }

    fn output(&self, s: &StepState) -> (Vec<Vertex>, Vec<Vertex>) {
        let v = &self.h.vertices;
        let mut f: Vec<Vertex> = s.fingerprint.iter().map(|&i| v[i as usize]).collect();
        f.sort();
        let in_f: HashSet<u32> = s.fingerprint.iter().copied().collect();
        let c = (0..v.len() as u32)
            .filter(|i| s.available[*i as usize] || in_f.contains(i))
            .map(|i| v[i as usize])
            .collect();
        (f, c)
    }
}

fn fingerprint_limit(h: &UniformHypergraph, tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Parameter(format!("tau = {tau} must be positive")));
    }
    Ok((h.l as f64 * tau * h.vertices.len() as f64).ceil() as usize)
}

/// Runs the max-degree fingerprint algorithm on the independent set `i`.
/// Returns the fingerprint `F ⊆ I` and the container `C ⊇ I`; `C` depends
/// only on `F`.
pub fn container_step(h: &UniformHypergraph, tau: f64, i: &[Vertex]) -> Result<(Vec<Vertex>, Vec<Vertex>)> {
    let mark = h.index_set(i)?;
    if !h.is_independent(i)? {
        return Err(Error::NotIndependent(format!("{i:?} contains an edge")));
    }
    let st = Stepper { h, limit: fingerprint_limit(h, tau)? };
    let mut s = st.start();
    while let Decision::Select(u) = st.next(&mut s) {
        if mark[u as usize] {
            st.take(&mut s, u);
        } else {
            st.skip(&mut s, u);
        }
    }
    Ok(st.output(&s))
}

/// Every `(F, C)` pair the algorithm can produce, found breadth-first over
/// the tree of in/out answers. Sorted by fingerprint.
pub fn all_containers(h: &UniformHypergraph, tau: f64) -> Result<Vec<(Vec<Vertex>, Vec<Vertex>)>> {
    let st = Stepper { h, limit: fingerprint_limit(h, tau)? };
    let mut queue = VecDeque::from([st.start()]);
    let mut out = Vec::new();
    while let Some(mut s) = queue.pop_front() {
        match st.next(&mut s) {
            Decision::Done => out.push(st.output(&s)),
            Decision::Select(u) => {
                let mut taken = s.clone();
                st.take(&mut taken, u);
                st.skip(&mut s, u);
                queue.push_back(taken);
                queue.push_back(s);
            }
        }
        if out.len() + queue.len() > MAX_FRONTIER {
            return Err(Error::budget("fingerprints", MAX_FRONTIER as u64, (out.len() + queue.len()) as u64));
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub frontier: usize,
    pub max_omega: f64,
    pub containers: usize,
    pub forced_splits: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchingRun {
    pub n: u32,
    pub band: Band,
    pub alpha: f64,
    pub delta: f64,
    pub tau: f64,
    pub omega_crit: f64,
    pub threshold: f64,
    pub containers: Vec<Template>,
    pub rounds: Vec<RoundLog>,
    pub forced_splits: u64,
    pub max_final_omega: f64,
    /// `Σ_T e^{ω(β,T)}` over the final containers.
    pub union_bound: f64,
    /// The same sum as an exact integer, for unit weights.
    #[serde(with = "option_biguint")]
    pub union_bound_exact: Option<BigUint>,
}

mod option_biguint {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<BigUint>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => super::biguint_decimal::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigUint>, D::Error> {
        let s = Option::<String>::deserialize(d)?;
        s.map(|s| s.parse().map_err(serde::de::Error::custom)).transpose()
    }
}

fn template_key(t: &Template) -> Vec<Vertex> {
    t.vertices()
}

/// Splits `t` into consecutive runs of vertices (canonical order), closing a
/// run as soon as its weight reaches `target`.
fn partition(t: &Template, beta: &WeightVector, target: f64) -> Result<Vec<Template>> {
    let mut pieces = Vec::new();
    let mut cur = Template::empty(t.n(), t.m())?;
    for v in t.vertices() {
        let mut s = cur.get(v.elem);
        s.insert(v.color);
        cur.set(v.elem, s);
        if omega(&cur, beta) >= target {
            pieces.push(std::mem::replace(&mut cur, Template::empty(t.n(), t.m())?));
        }
    }
    if cur.vertex_count() > 0 {
        pieces.push(cur);
    }
    Ok(pieces)
}

struct Expansion {
    children: Vec<Template>,
    forced: bool,
}

/// Branches on the vertices of one forbidden chain inside `t`, preferring a
/// chain through the highest-degree vertex of `h`. Each child drops one
/// vertex of the chain, which no valid subset can contain in full.
fn force_split(t: &Template, trie: &PatternTrie, h: Option<&UniformHypergraph>) -> Result<Vec<Template>> {
    let edge: Vec<Vertex> = match h.filter(|h| h.edge_count() > 0) {
        Some(h) => {
            let deg = h.degrees();
            let mut best = 0;
            for i in 1..deg.len() {
                if deg[i] > deg[best] {
                    best = i;
                }
            }
            let e = h.edges.iter().find(|e| e.contains(&(best as u32))).expect("max-degree vertex has an edge");
            e.iter().map(|&i| h.vertices[i as usize]).collect()
        }
        None => forbidden_chains(t, trie)?
            .into_iter()
            .next()
            .ok_or_else(|| Error::Precondition("heavy template contains no forbidden chain".into()))?,
    };
    Ok(edge
        .iter()
        .map(|&v| {
            let mut c = t.clone();
            c.remove_vertex(v);
            c
        })
        .collect())
}

fn expand(
    t: &Template,
    family: &ForbiddenFamily,
    trie: &PatternTrie,
    beta: &WeightVector,
    target: f64,
    delta: f64,
    tau: f64,
) -> Result<Expansion> {
    let mut levels: Vec<(usize, LeveledHypergraph)> = Vec::new();
    for piece in partition(t, beta, target)? {
        let r = build_balanced_unchecked(&piece, family, trie, delta)?;
        let l = match r.success {
            Some(l) => l,
            None => match (2..=family.k()).max_by_key(|&l| (r.hypergraph.edge_count(l), std::cmp::Reverse(l))) {
                Some(l) if r.hypergraph.edge_count(l) > 0 => l,
                _ => continue,
            },
        };
        levels.push((l, r.hypergraph));
    }
    let mut freq = vec![0usize; family.k() + 1];
    for (l, _) in &levels {
        freq[*l] += 1;
    }
    let chosen = (2..=family.k()).max_by_key(|&l| (freq[l], std::cmp::Reverse(l))).filter(|&l| freq[l] > 0);
    let Some(l) = chosen else {
        return Ok(Expansion { children: force_split(t, trie, None)?, forced: true });
    };
    let edges: Vec<Vec<Vertex>> =
        levels.iter().filter(|(pl, _)| *pl == l).flat_map(|(_, h)| h.edges(l).iter().cloned()).collect();
    let h = UniformHypergraph::new(l, t.vertices(), &edges)?;
    let size = t.vertex_count();
    let mut children = Vec::new();
    for (_, c) in all_containers(&h, tau)? {
        if c.len() >= size {
            return Ok(Expansion { children: force_split(t, trie, Some(&h))?, forced: true });
        }
        children.push(Template::from_vertices(t.n(), t.m(), c)?);
    }
    Ok(Expansion { children, forced: false })
}

/// Repeatedly replaces every template heavier than
/// `(ω_crit + α)·C(n, ⌊n/2⌋)` by the containers of a codegree-capped
/// hypergraph of forbidden chains inside it, starting from the full template
/// on `band`. `tau` defaults to `1/n`.
pub fn branching_run(
    n: u32,
    family: &ForbiddenFamily,
    beta: &WeightVector,
    alpha: f64,
    delta: f64,
    tau: Option<f64>,
    band: Band,
) -> Result<BranchingRun> {
    beta.check_colors(family.m())?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!("alpha = {alpha} must be positive")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Parameter(format!("delta = {delta} must be positive")));
    }
    let tau = tau.unwrap_or(1.0 / f64::from(n.max(1)));
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Parameter(format!("tau = {tau} must be positive")));
    }
    let wc = omega_crit(family, beta)?.omega_crit;
    let augmented = augment_with_all_chains(family)?;
    let trie = PatternTrie::new(&augmented);
    let threshold = (wc + alpha) * middle_binomial(n);

    let mut frontier = vec![Template::full(n, family.m(), band)?];
    let mut done: Vec<Template> = Vec::new();
    let mut rounds = Vec::new();
    let mut forced_total = 0u64;
    for round in 0.. {
        if round >= MAX_ROUNDS {
            return Err(Error::budget("branching rounds", MAX_ROUNDS as u64, round as u64));
        }
        let (heavy, light): (Vec<Template>, Vec<Template>) =
            frontier.into_iter().partition(|t| omega(t, beta) > threshold);
        done.extend(light);
        if heavy.is_empty() {
            break;
        }
        let max_omega = heavy.iter().map(|t| omega(t, beta)).fold(0.0, f64::max);
        let expanded: Vec<Result<Expansion>> =
            heavy.par_iter().map(|t| expand(t, &augmented, &trie, beta, threshold, delta, tau)).collect();
        let mut next = Vec::new();
        let mut seen = HashSet::new();
        let mut forced = 0u64;
        for e in expanded {
            let e = e?;
            forced += u64::from(e.forced);
            for c in e.children {
                if seen.insert(c.clone()) {
                    next.push(c);
                }
            }
        }
        next.sort_by_cached_key(template_key);
        if next.len() > MAX_FRONTIER {
            return Err(Error::budget("frontier templates", MAX_FRONTIER as u64, next.len() as u64));
        }
        log::info!(
            "round {round}: frontier {}, max omega {max_omega:.6}, containers {}, forced splits {forced}",
            heavy.len(),
            next.len()
        );
        rounds.push(RoundLog { round, frontier: heavy.len(), max_omega, containers: next.len(), forced_splits: forced });
        forced_total += forced;
        frontier = next;
    }

    let mut seen = HashSet::new();
    done.retain(|t| seen.insert(t.clone()));
    done.sort_by_cached_key(template_key);
    let weights: Vec<f64> = done.iter().map(|t| omega(t, beta)).collect();
    let union_bound = neumaier_sum(weights.iter().map(|w| w.exp()));
    let union_bound_exact = beta.is_all_ones().then(|| done.iter().map(count_contained).sum());
    Ok(BranchingRun {
        n,
        band,
        alpha,
        delta,
        tau,
        omega_crit: wc,
        threshold,
        max_final_omega: weights.iter().copied().fold(0.0, f64::max),
        containers: done,
        rounds,
        forced_splits: forced_total,
        union_bound,
        union_bound_exact,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub samples: u64,
    pub seed: u64,
}

impl Default for SpotCheck {
    fn default() -> Self {
        SpotCheck { samples: 10_000, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub covered: bool,
    pub exhaustive: bool,
    /// Valid colored subsets checked.
    pub checked: u64,
    pub first_uncovered: Option<Vec<(Element, ColorId)>>,
}

/// Checks that every valid colored subset of the band lies in some
/// container: exhaustively when `(m+1)^{|band|} ≤ 10⁶`, otherwise on
/// valid subsets drawn by rejection sampling from random colorings whose
/// density is itself drawn uniformly per attempt.
pub fn verify_coverage(
    containers: &[Template],
    n: u32,
    family: &ForbiddenFamily,
    band: Band,
    spot: SpotCheck,
) -> Result<CoverageReport> {
    if let Some(t) = containers.iter().find(|t| t.n() != n || t.m() != family.m()) {
        return Err(Error::Parameter(format!(
            "container on P([{}]) with {} colors does not match n = {n}, m = {}",
            t.n(),
            t.m(),
            family.m()
        )));
    }
    let covered_by = |s: &[(Element, ColorId)]| containers.iter().any(|t| t.contains_colored(s));
    let size = band.size(n) as f64;
    if (family.m() as f64 + 1.0).powf(size) <= EXHAUSTIVE_COVERAGE_LIMIT {
        let host = Template::full(n, family.m(), band)?;
        let mut first = None;
        let checked = for_each_valid(&host, family, u64::MAX, |s| {
            if covered_by(s) {
                true
            } else {
                first = Some(s.to_vec());
                false
            }
        })?;
        return Ok(CoverageReport { covered: first.is_none(), exhaustive: true, checked, first_uncovered: first });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spot.seed);
    let m = family.m();
    let mut checked = 0;
    let attempts = spot.samples.saturating_mul(1000);
    for _ in 0..attempts {
        if checked >= spot.samples {
            break;
        }
        let density: f64 = rng.gen_range(0.0..1.0);
        let p = vec![density / m as f64; m];
        let mut coloring = random_coloring(n, &p, &mut rng)?;
        for x in coloring.support() {
            if !band.contains(x) {
                coloring.set(x, ColorSet::EMPTY);
            }
        }
        if !template_is_valid(&coloring, family) {
            continue;
        }
        let s: Vec<(Element, ColorId)> = coloring
            .support()
            .into_iter()
            .map(|x| (x, coloring.get(x).iter().next().expect("singleton")))
            .collect();
        checked += 1;
        if !covered_by(&s) {
            return Ok(CoverageReport { covered: false, exhaustive: false, checked, first_uncovered: Some(s) });
        }
    }
    Ok(CoverageReport { covered: true, exhaustive: false, checked, first_uncovered: None })
}
