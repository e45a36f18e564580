//! Exact (weighted) counting of validly colored subsets by pruned
//! backtracking.
//!
//! Elements are assigned in canonical order, so every predecessor of `x` is
//! decided before `x`. For each pattern we keep the longest greedily matched
//! prefix over chains ending at or below each element; a color choice is
//! pruned as soon as it completes a pattern.

use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{canonical_order, Band, Element};
use crate::patterns::{ColorId, ColorSet, ForbiddenFamily, MAX_COLORS};
use crate::templates::{Template, WeightVector};

pub const DEFAULT_NODE_CAP: u64 = 1_000_000_000;
const PROGRESS_EVERY: u64 = 10_000_000;
const FLUSH_EVERY: u64 = 1 << 12;

#[derive(Clone, Debug)]
pub struct CountOptions {
    pub node_cap: u64,
    /// Number of leading branching elements whose choices are split across
    /// rayon workers. Zero runs sequentially.
    pub split_depth: usize,
}

impl Default for CountOptions {
    fn default() -> Self {
        CountOptions { node_cap: DEFAULT_NODE_CAP, split_depth: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Unit weights: the exact number of valid colored subsets.
    Exact(#[serde(with = "biguint_decimal")] BigUint),
    Weighted(f64),
}

impl Measure {
    pub fn to_f64(&self) -> f64 {
        match self {
            Measure::Exact(v) => v.to_string().parse().unwrap_or(f64::INFINITY),
            Measure::Weighted(v) => *v,
        }
    }

    pub fn exact(&self) -> Option<&BigUint> {
        match self {
            Measure::Exact(v) => Some(v),
            Measure::Weighted(_) => None,
        }
    }
}

pub(crate) mod biguint_decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountResult {
    pub mu: Measure,
    pub n: u32,
    pub family_digest: String,
    pub band: Option<Band>,
    pub nodes: u64,
    pub prunes: u64,
}

trait Weight: Copy + Send + Sync {
    const ZERO: Self;
    const ONE: Self;
    fn times(self, color: usize, weights: &[f64]) -> Self;
    fn mul(self, other: Self) -> Self;
    fn sum(terms: &[Self]) -> Self;
}

impl Weight for u128 {
    const ZERO: Self = 0;
    const ONE: Self = 1;
    fn times(self, _: usize, _: &[f64]) -> Self {
        self
    }
    fn mul(self, other: Self) -> Self {
        self * other
    }
    fn sum(terms: &[Self]) -> Self {
        terms.iter().sum()
    }
}

impl Weight for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn times(self, color: usize, weights: &[f64]) -> Self {
        self * weights[color]
    }
    fn mul(self, other: Self) -> Self {
        self * other
    }
    fn sum(terms: &[Self]) -> Self {
        neumaier_sum(terms.iter().copied())
    }
}

/// Compensated summation.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

type Visitor<'f> = dyn FnMut(&[(Element, ColorId)]) -> bool + 'f;

/// Backtracking state shared by counting and visiting.
#[derive(Clone)]
struct Walker<'a> {
    order: &'a [Element],
    allowed: &'a [ColorSet],
    preds: &'a [Vec<u32>],
    pats: &'a [Vec<u8>],
    /// Positions past this one carry no colors.
    end: usize,
    np: usize,
    run: Vec<u8>,
    best: Vec<u8>,
    nodes: u64,
    unflushed: u64,
    prunes: u64,
    cap: u64,
    shared: &'a AtomicU64,
}

struct Plan {
    order: Vec<Element>,
    allowed: Vec<ColorSet>,
    preds: Vec<Vec<u32>>,
    pats: Vec<Vec<u8>>,
    end: usize,
}

impl Plan {
    fn new(host: &Template, family: &ForbiddenFamily) -> Result<Plan> {
        if host.m() != family.m() {
            return Err(Error::Parameter(format!(
                "template has {} colors, family has {}",
                host.m(),
                family.m()
            )));
        }
        let order = canonical_order(host.n())?;
        let mut pos_of = vec![0u32; order.len()];
        for (i, x) in order.iter().enumerate() {
            pos_of[x.0 as usize] = i as u32;
        }
        let allowed: Vec<ColorSet> = order.iter().map(|&x| host.get(x)).collect();
        let preds = order
            .iter()
            .map(|x| x.lower_covers().map(|y| pos_of[y.0 as usize]).collect())
            .collect();
        let pats = family
            .patterns()
            .iter()
            .map(|p| p.colors.iter().map(|c| c.index() as u8).collect())
            .collect();
        let end = allowed.iter().rposition(|s| !s.is_empty()).map_or(0, |i| i + 1);
        Ok(Plan { order, allowed, preds, pats, end })
    }

    fn walker<'a>(&'a self, cap: u64, shared: &'a AtomicU64) -> Walker<'a> {
        let np = self.pats.len();
        Walker {
            order: &self.order,
            allowed: &self.allowed,
            preds: &self.preds,
            pats: &self.pats,
            end: self.end,
            np,
            run: vec![0; self.order.len() * np],
            best: vec![0; self.order.len() * np],
            nodes: 0,
            unflushed: 0,
            prunes: 0,
            cap,
            shared,
        }
    }
}

impl Walker<'_> {
    fn tick(&mut self) -> Result<()> {
        self.nodes += 1;
        self.unflushed += 1;
        if self.unflushed >= FLUSH_EVERY {
            let total = self.shared.fetch_add(self.unflushed, Ordering::Relaxed) + self.unflushed;
            self.unflushed = 0;
            if total / PROGRESS_EVERY != (total - FLUSH_EVERY) / PROGRESS_EVERY {
                log::debug!("search visited {total} nodes");
            }
            if total > self.cap {
                return Err(Error::budget("search nodes", self.cap, total));
            }
        }
        if self.nodes > self.cap {
            return Err(Error::budget("search nodes", self.cap, self.nodes));
        }
        Ok(())
    }

    /// Running maxima over the predecessors of `pos` into `best[pos]`, and
    /// the uncolored choice into `run[pos]`.
    fn prepare(&mut self, pos: usize) {
        let np = self.np;
        let base = pos * np;
        self.best[base..base + np].fill(0);
        for &q in &self.preds[pos] {
            let q = q as usize * np;
            for p in 0..np {
                let r = self.run[q + p];
                if r > self.best[base + p] {
                    self.best[base + p] = r;
                }
            }
        }
        let (run, best) = (&mut self.run, &self.best);
        run[base..base + np].copy_from_slice(&best[base..base + np]);
    }

    /// Writes `run[pos]` for color index `c`; `false` if a pattern completes.
    fn choose(&mut self, pos: usize, c: usize) -> bool {
        let base = pos * self.np;
        for p in 0..self.np {
            let pat = &self.pats[p];
            let b = self.best[base + p];
            let bi = usize::from(b);
            let h = if bi < pat.len() && usize::from(pat[bi]) == c { b + 1 } else { b };
            if usize::from(h) == pat.len() {
                return false;
            }
            self.run[base + p] = h;
        }
        true
    }

    fn uncolor(&mut self, pos: usize) {
        let base = pos * self.np;
        let (run, best) = (&mut self.run, &self.best);
        run[base..base + self.np].copy_from_slice(&best[base..base + self.np]);
    }

    fn count<W: Weight>(&mut self, pos: usize, weights: &[f64]) -> Result<W> {
        self.tick()?;
        if pos >= self.end {
            return Ok(W::ONE);
        }
        self.prepare(pos);
        let allowed = self.allowed[pos];
        let mut terms = [W::ZERO; MAX_COLORS + 1];
        terms[0] = self.count::<W>(pos + 1, weights)?;
        let mut t = 1;
        for c in allowed.iter() {
            let ci = c.index();
            if !self.choose(pos, ci) {
                self.prunes += 1;
                continue;
            }
            terms[t] = self.count::<W>(pos + 1, weights)?.times(ci, weights);
            t += 1;
        }
        Ok(W::sum(&terms[..t]))
    }

    fn visit(
        &mut self,
        pos: usize,
        stack: &mut Vec<(Element, ColorId)>,
        f: &mut Visitor<'_>,
    ) -> Result<bool> {
        self.tick()?;
        if pos >= self.end {
            return Ok(f(stack));
        }
        self.prepare(pos);
        if !self.visit(pos + 1, stack, f)? {
            return Ok(false);
        }
        for c in self.allowed[pos].iter() {
            if !self.choose(pos, c.index()) {
                self.prunes += 1;
                continue;
            }
            stack.push((self.order[pos], c));
            let go_on = self.visit(pos + 1, stack, f)?;
            stack.pop();
            if !go_on {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Valid partial assignments covering the first `depth` branching
    /// positions. Returns `(next position, choices)` pairs in search order.
    fn prefixes(&mut self, depth: usize) -> Vec<(usize, Vec<Option<usize>>)> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.collect_prefixes(0, depth, &mut path, &mut out);
        out
    }

    fn collect_prefixes(
        &mut self,
        pos: usize,
        depth: usize,
        path: &mut Vec<Option<usize>>,
        out: &mut Vec<(usize, Vec<Option<usize>>)>,
    ) {
        if depth == 0 || pos >= self.end {
            out.push((pos, path.clone()));
            return;
        }
        self.prepare(pos);
        let branching = !self.allowed[pos].is_empty();
        path.push(None);
        self.collect_prefixes(pos + 1, depth - usize::from(branching), path, out);
        path.pop();
        for c in self.allowed[pos].iter() {
            if self.choose(pos, c.index()) {
                path.push(Some(c.index()));
                self.collect_prefixes(pos + 1, depth - 1, path, out);
                path.pop();
            } else {
                self.prunes += 1;
            }
            self.uncolor(pos);
        }
        self.uncolor(pos);
    }

    fn replay(&mut self, choices: &[Option<usize>]) {
        for (pos, ch) in choices.iter().enumerate() {
            self.prepare(pos);
            if let Some(c) = *ch {
                let ok = self.choose(pos, c);
                debug_assert!(ok);
            }
        }
    }

    fn finish(&self) {
        self.shared.fetch_add(self.unflushed, Ordering::Relaxed);
    }
}

fn run_count<W: Weight>(plan: &Plan, weights: &[f64], opts: &CountOptions) -> Result<(W, u64, u64)> {
    let shared = AtomicU64::new(0);
    if opts.split_depth == 0 {
        let mut w = plan.walker(opts.node_cap, &shared);
        let v = w.count::<W>(0, weights)?;
        return Ok((v, w.nodes, w.prunes));
    }
    let mut head = plan.walker(opts.node_cap, &shared);
    let prefixes = head.prefixes(opts.split_depth);
    let parts: Vec<Result<(W, u64, u64)>> = prefixes
        .par_iter()
        .map(|(start, choices)| {
            let mut w = plan.walker(opts.node_cap, &shared);
            w.replay(choices);
            let sub = w.count::<W>(*start, weights);
            w.finish();
            let scale = choices
                .iter()
                .flatten()
                .fold(W::ONE, |acc, &c| acc.times(c, weights));
            sub.map(|v| (v.mul(scale), w.nodes, w.prunes))
        })
        .collect();
    let mut values = Vec::with_capacity(parts.len());
    let (mut nodes, mut prunes) = (head.nodes, head.prunes);
    for part in parts {
        let (v, a, b) = part?;
        values.push(v);
        nodes += a;
        prunes += b;
    }
    Ok((W::sum(&values), nodes, prunes))
}

/// `μ(β, Λ(G, n))`, optionally restricted to elements with rank in `band`.
///
/// Unit weights switch to exact integer counting.
pub fn mu_valid(
    n: u32,
    family: &ForbiddenFamily,
    beta: &WeightVector,
    band: Option<Band>,
    opts: &CountOptions,
) -> Result<CountResult> {
    let host = Template::full(n, family.m(), band.unwrap_or(Band::full(n)))?;
    let mut r = mu_valid_within(&host, family, beta, opts)?;
    r.band = band;
    Ok(r)
}

/// Measure of the valid colored subsets contained in `host`.
pub fn mu_valid_within(
    host: &Template,
    family: &ForbiddenFamily,
    beta: &WeightVector,
    opts: &CountOptions,
) -> Result<CountResult> {
    beta.check_colors(family.m())?;
    let plan = Plan::new(host, family)?;
    let (mu, nodes, prunes) = if beta.is_all_ones() {
        let (v, nodes, prunes) = run_count::<u128>(&plan, beta.as_slice(), opts)?;
        (Measure::Exact(BigUint::from(v)), nodes, prunes)
    } else {
        let (v, nodes, prunes) = run_count::<f64>(&plan, beta.as_slice(), opts)?;
        (Measure::Weighted(v), nodes, prunes)
    };
    Ok(CountResult { mu, n: host.n(), family_digest: family.digest(), band: None, nodes, prunes })
}

/// Calls `f` on every valid colored subset contained in `host`, as
/// `(element, color)` pairs in canonical order. `f` returns `false` to stop
/// early. Returns the number of subsets visited.
pub fn for_each_valid(
    host: &Template,
    family: &ForbiddenFamily,
    node_cap: u64,
    mut f: impl FnMut(&[(Element, ColorId)]) -> bool,
) -> Result<u64> {
    let plan = Plan::new(host, family)?;
    let shared = AtomicU64::new(0);
    let mut w = plan.walker(node_cap, &shared);
    let mut leaves = 0u64;
    let mut stack = Vec::new();
    w.visit(0, &mut stack, &mut |s| {
        leaves += 1;
        f(s)
    })?;
    Ok(leaves)
}

pub const CONTAINED_BUDGET: u64 = 10_000_000;

/// Direct sum of `Π β_{c(x)}` over all colored subsets inside `t`.
pub fn mu_contained_enumerated(t: &Template, beta: &WeightVector) -> Result<f64> {
    let support = t.support();
    let mut total: u64 = 1;
    for &x in &support {
        total = total.saturating_mul(u64::from(t.get(x).len()) + 1);
    }
    if total > CONTAINED_BUDGET {
        return Err(Error::budget("contained colored subsets", CONTAINED_BUDGET, total));
    }
    let options: Vec<Vec<f64>> = support
        .iter()
        .map(|&x| std::iter::once(1.0).chain(t.get(x).iter().map(|c| beta.get(c))).collect())
        .collect();
    let mut digits = vec![0usize; support.len()];
    let mut terms = Vec::with_capacity(total as usize);
    loop {
        terms.push(digits.iter().zip(&options).map(|(&d, o)| o[d]).product::<f64>());
        let mut i = 0;
        loop {
            if i == digits.len() {
                return Ok(neumaier_sum(terms));
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

fn probability_weights(p: &[f64]) -> Result<WeightVector> {
    let total: f64 = p.iter().sum();
    if total > 1.0 + 1e-12 {
        return Err(Error::Weights(format!("probabilities sum to {total} > 1")));
    }
    WeightVector::new(p.to_vec())
}

/// Expected number of validly colored subsets when each element takes color
/// `i` with probability `p_i` (uncolored otherwise). By linearity this is
/// `μ(p, Λ(G, n))`.
pub fn expected_valid_count(
    n: u32,
    family: &ForbiddenFamily,
    p: &[f64],
    opts: &CountOptions,
) -> Result<f64> {
    let w = probability_weights(p)?;
    Ok(mu_valid(n, family, &w, None, opts)?.mu.to_f64())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: u64,
}

pub const MC_STREAMS: u64 = 16;

/// Samples random colorings and counts, for each, the valid colored subsets
/// of its colored elements. Streams are seeded from `seed` and combined in
/// stream order, so the result does not depend on scheduling.
pub fn monte_carlo_valid_count(
    n: u32,
    family: &ForbiddenFamily,
    p: &[f64],
    samples: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    let w = probability_weights(p)?;
    w.check_colors(family.m())?;
    if samples < 2 {
        return Err(Error::Parameter("need at least 2 samples".into()));
    }
    let ones = WeightVector::ones(family.m());
    let per_stream: Vec<(u64, u64)> = (0..MC_STREAMS)
        .map(|i| (i, samples / MC_STREAMS + u64::from(i < samples % MC_STREAMS)))
        .collect();
    let sums: Vec<Result<(f64, f64)>> = per_stream
        .par_iter()
        .map(|&(stream, count)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..count {
                let host = random_coloring(n, w.as_slice(), &mut rng)?;
                let v = mu_valid_within(&host, family, &ones, &CountOptions::default())?.mu.to_f64();
                s += v;
                s2 += v * v;
            }
            Ok((s, s2))
        })
        .collect();
    let (mut s, mut s2) = (0.0, 0.0);
    for r in sums {
        let (a, b) = r?;
        s += a;
        s2 += b;
    }
    let r = samples as f64;
    let mean = s / r;
    let var = ((s2 - r * mean * mean) / (r - 1.0)).max(0.0);
    Ok(MonteCarloEstimate { mean, std_err: (var / r).sqrt(), samples })
}

/// Colors each element independently: color `i` with probability `p_i`,
/// nothing otherwise. Returned as a template of singletons.
pub fn random_coloring<R: Rng + ?Sized>(n: u32, p: &[f64], rng: &mut R) -> Result<Template> {
    let mut t = Template::empty(n, p.len())?;
    for mask in 0..1u32 << n {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &pi) in p.iter().enumerate() {
            acc += pi;
            if u < acc {
                t.set(Element(mask), ColorSet::singleton(ColorId::from_index(i)));
                break;
            }
        }
    }
    Ok(t)
}

/// `Π_{x ∉ band} (1 + Σ β_i)`: the factor by which dropping the band
/// restriction can at most grow the measure.
pub fn outside_band_factor(n: u32, band: Band, beta: &WeightVector) -> f64 {
    let outside = (1u128 << n) - band.size(n);
    (1.0 + beta.total()).powf(outside as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::tests::four_color_family;
    use crate::templates::tests::{random_family, random_template};
    use crate::templates::{mu_contained_closed_form, template_is_valid};
    use rand::Rng;

    fn exact(r: &CountResult) -> u128 {
        r.mu.exact().unwrap().to_string().parse().unwrap()
    }

    /// Every coloring of `P([n])` with `m + 1` options, filtered by the
    /// template validity DP on singleton templates.
    fn brute_force(n: u32, family: &ForbiddenFamily, beta: &WeightVector) -> f64 {
        let size = 1usize << n;
        let m = family.m();
        let mut digits = vec![0usize; size];
        let mut total = 0.0;
        loop {
            let mut t = Template::empty(n, m).unwrap();
            let mut w = 1.0;
            for (mask, &d) in digits.iter().enumerate() {
                if d > 0 {
                    let c = ColorId(d as u8);
                    t.set(Element(mask as u32), ColorSet::singleton(c));
                    w *= beta.get(c);
                }
            }
            if template_is_valid(&t, family) {
                total += w;
            }
            let mut i = 0;
            loop {
                if i == size {
                    return total;
                }
                digits[i] += 1;
                if digits[i] <= m {
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn antichain_counts() {
        let g = ForbiddenFamily::monochromatic_chain(2).unwrap();
        let ones = WeightVector::ones(1);
        let got: Vec<u128> = (0..=4)
            .map(|n| exact(&mu_valid(n, &g, &ones, None, &CountOptions::default()).unwrap()))
            .collect();
        assert_eq!(got, vec![2, 3, 6, 20, 168]);
    }

    #[test]
    fn n_zero_is_one_plus_total_weight() {
        let g = four_color_family();
        let b = WeightVector::new(vec![0.5, 1.5, 2.0, 0.25]).unwrap();
        let r = mu_valid(0, &g, &b, None, &CountOptions::default()).unwrap();
        assert!((r.mu.to_f64() - (1.0 + b.total())).abs() < 1e-12);
    }

    #[test]
    fn all_pairs_two_colors() {
        let g = ForbiddenFamily::from_lists(2, &[&[1, 1], &[2, 2], &[1, 2], &[2, 1]]).unwrap();
        let r = mu_valid(2, &g, &WeightVector::ones(2), None, &CountOptions::default()).unwrap();
        assert_eq!(exact(&r), 13);
        assert_eq!(brute_force(2, &g, &WeightVector::ones(2)), 13.0);
    }

    #[test]
    fn pruned_equals_unpruned() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..40 {
            let m = rng.gen_range(1..=2);
            let n = if m == 1 { rng.gen_range(0..=4) } else { rng.gen_range(0..=3) };
            if ((m + 1) as f64).powi(1 << n) > 1e6 {
                continue;
            }
            let g = random_family(m, 4, 3, &mut rng);
            let beta = WeightVector::new((0..m).map(|_| rng.gen_range(0.2..2.0)).collect()).unwrap();
            let fast = mu_valid(n, &g, &beta, None, &CountOptions::default()).unwrap().mu.to_f64();
            let slow = brute_force(n, &g, &beta);
            assert!((fast - slow).abs() <= 1e-9 * slow, "{fast} vs {slow}");
            let ones = WeightVector::ones(m);
            let fast = mu_valid(n, &g, &ones, None, &CountOptions::default()).unwrap().mu.to_f64();
            assert_eq!(fast, brute_force(n, &g, &ones));
        }
    }

    #[test]
    fn split_search_is_schedule_independent() {
        let g = four_color_family();
        let ones = WeightVector::ones(4);
        let seq = mu_valid(3, &g, &ones, None, &CountOptions::default()).unwrap();
        for depth in [1, 2, 4] {
            let opts = CountOptions { split_depth: depth, ..Default::default() };
            let par = mu_valid(3, &g, &ones, None, &opts).unwrap();
            assert_eq!(par.mu, seq.mu);
        }
        let b = WeightVector::new(vec![0.3, 0.7, 1.1, 0.2]).unwrap();
        let seq = mu_valid(3, &g, &b, None, &CountOptions::default()).unwrap().mu.to_f64();
        let opts = CountOptions { split_depth: 3, ..Default::default() };
        let a = mu_valid(3, &g, &b, None, &opts).unwrap().mu.to_f64();
        let again = mu_valid(3, &g, &b, None, &opts).unwrap().mu.to_f64();
        assert_eq!(a.to_bits(), again.to_bits());
        assert!((a - seq).abs() <= 1e-12 * seq);
    }

    #[test]
    fn node_cap_reports_budget() {
        let g = ForbiddenFamily::monochromatic_chain(2).unwrap();
        let opts = CountOptions { node_cap: 50, ..Default::default() };
        let e = mu_valid(4, &g, &WeightVector::ones(1), None, &opts).unwrap_err();
        assert!(e.is_budget());
    }

    #[test]
    fn contained_enumeration_examples() {
        let b = WeightVector::ones(2);
        assert_eq!(mu_contained_enumerated(&Template::empty(2, 2).unwrap(), &b).unwrap(), 1.0);
        let mut t = Template::empty(0, 2).unwrap();
        t.set(Element(0), ColorSet(0b11));
        let b = WeightVector::new(vec![2.0, 3.0]).unwrap();
        assert_eq!(mu_contained_enumerated(&t, &b).unwrap(), 6.0);
    }

    #[test]
    fn contained_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let m = rng.gen_range(1..=3);
            let t = random_template(3, m, 0.4, &mut rng);
            let b = WeightVector::new((0..m).map(|_| rng.gen_range(0.01..2.0)).collect()).unwrap();
            let e = mu_contained_enumerated(&t, &b).unwrap();
            let c = mu_contained_closed_form(&t, &b);
            assert!((e - c).abs() <= 1e-9 * c);
        }
    }

    #[test]
    fn expected_count_small_cases() {
        let g = ForbiddenFamily::monochromatic_chain(2).unwrap();
        let v = expected_valid_count(1, &g, &[0.5], &CountOptions::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
        let v = expected_valid_count(3, &g, &[1e-6], &CountOptions::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-5);
        assert!(expected_valid_count(1, &g, &[1.5], &CountOptions::default()).is_err());
    }

    #[test]
    fn band_bound_direction() {
        let g = ForbiddenFamily::monochromatic_chain(2).unwrap();
        for n in 1..=4 {
            let band = Band::closed_middle_third(n);
            let b = WeightVector::new(vec![0.7]).unwrap();
            let full = mu_valid(n, &g, &b, None, &CountOptions::default()).unwrap().mu.to_f64();
            let part = mu_valid(n, &g, &b, Some(band), &CountOptions::default()).unwrap().mu.to_f64();
            assert!(part * outside_band_factor(n, band, &b) >= full);
        }
    }

    #[test]
    fn visitor_sees_every_valid_subset_once() {
        let g = four_color_family();
        let host = Template::full(2, 4, Band::full(2)).unwrap();
        let mut seen = std::collections::HashSet::new();
        let leaves = for_each_valid(&host, &g, DEFAULT_NODE_CAP, |s| {
            assert!(seen.insert(s.to_vec()));
            true
        })
        .unwrap();
        let count = mu_valid(2, &g, &WeightVector::ones(4), None, &CountOptions::default()).unwrap();
        assert_eq!(u128::from(leaves), exact(&count));
    }

    #[test]
    fn monte_carlo_matches_exact() {
        let g = ForbiddenFamily::monochromatic_chain(2).unwrap();
        let exact = expected_valid_count(2, &g, &[0.5], &CountOptions::default()).unwrap();
        let est = monte_carlo_valid_count(2, &g, &[0.5], 20_000, 1).unwrap();
        assert!((est.mean - exact).abs() <= 3.0 * est.std_err, "{est:?} vs {exact}");
        let again = monte_carlo_valid_count(2, &g, &[0.5], 20_000, 1).unwrap();
        assert_eq!(est, again);
    }
}
