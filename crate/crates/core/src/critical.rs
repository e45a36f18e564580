//! The critical exponent: the heaviest valid template supported on a single
//! chain.
//!
//! Walking up a chain and reading the color set at each position drives the
//! greedy automaton of [`ForbiddenFamily::advance`]. A chain template is
//! valid exactly when no pattern coordinate saturates, so the maximum is a
//! longest path in the (acyclic, for sparse families) automaton graph with
//! edge weights `log(1 + |S|_β)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patterns::{big_l, ColorSet, ForbiddenFamily, MatchState, MAX_MATCH_STATES};
use crate::templates::{log_weight, template_validity_oracle, ChainProfile, WeightVector};

/// Reconstructed optimal profiles are capped at this many.
pub const MAX_PROFILES: usize = 64;

/// Absolute tolerance (scaled by the optimum when it exceeds 1) for
/// deciding that two path values tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalResult {
    pub omega_crit: f64,
    /// Every optimal profile found, sorted by length then set masks.
    pub optimal_profiles: Vec<ChainProfile>,
    /// More than [`MAX_PROFILES`] optima exist.
    pub truncated: bool,
    /// `L(G)`.
    pub big_l: usize,
}

struct Solver<'a> {
    family: &'a ForbiddenFamily,
    edges: Vec<(ColorSet, f64)>,
    memo: HashMap<MatchState, f64>,
}

impl Solver<'_> {
    fn best(&mut self, state: &MatchState) -> Result<f64> {
        if let Some(&v) = self.memo.get(state) {
            return Ok(v);
        }
        if self.memo.len() >= MAX_MATCH_STATES {
            return Err(self.family.state_space_error());
        }
        let mut best = 0.0f64;
        for i in 0..self.edges.len() {
            let (set, w) = self.edges[i];
            let next = self.family.advance(state, set);
            if self.family.is_saturated(&next) {
                continue;
            }
            best = best.max(w + self.best(&next)?);
        }
        self.memo.insert(state.clone(), best);
        Ok(best)
    }

    /// Depth-first walk along tight edges. Returns `false` once the cap is
    /// hit.
    fn collect(
        &mut self,
        state: &MatchState,
        tol: f64,
        path: &mut Vec<ColorSet>,
        out: &mut Vec<ChainProfile>,
    ) -> Result<bool> {
        let here = self.best(state)?;
        if here <= tol {
            if out.len() == MAX_PROFILES {
                return Ok(false);
            }
            out.push(ChainProfile { sets: path.clone() });
            return Ok(true);
        }
        for i in 0..self.edges.len() {
            let (set, w) = self.edges[i];
            let next = self.family.advance(state, set);
            if self.family.is_saturated(&next) {
                continue;
            }
            if w + self.best(&next)? >= here - tol {
                path.push(set);
                let more = self.collect(&next, tol, path, out)?;
                path.pop();
                if !more {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// `ω_crit(β)` together with the chain profiles attaining it.
pub fn omega_crit(family: &ForbiddenFamily, beta: &WeightVector) -> Result<CriticalResult> {
    family.require_sparse()?;
    beta.check_colors(family.m())?;
    let edges: Vec<(ColorSet, f64)> = (1..1u32 << family.m())
        .map(|mask| (ColorSet(mask), log_weight(ColorSet(mask), beta)))
        .collect();
    let mut solver = Solver { family, edges, memo: HashMap::new() };
    let start = family.initial_state();
    let value = solver.best(&start)?;
    let tol = TIE_TOLERANCE * value.max(1.0);
    let mut profiles = Vec::new();
    let complete = solver.collect(&start, tol, &mut Vec::new(), &mut profiles)?;
    profiles.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.sets.cmp(&b.sets)));
    profiles.dedup();
    Ok(CriticalResult {
        omega_crit: value,
        optimal_profiles: profiles,
        truncated: !complete,
        big_l: big_l(family)?,
    })
}

/// Brute-force budget for [`omega_crit_oracle`]: `(2^m)^max_len`.
pub const ORACLE_BUDGET: f64 = 1e8;

/// Maximum of `Σ log(1 + |S_j|_β)` over every sequence of nonempty color
/// sets of length at most `max_len`, each checked for validity by
/// enumerating its colorings.
pub fn omega_crit_oracle(family: &ForbiddenFamily, beta: &WeightVector, max_len: usize) -> Result<f64> {
    beta.check_colors(family.m())?;
    let m = family.m();
    let cost = (2f64).powi((m * max_len) as i32);
    if cost > ORACLE_BUDGET {
        return Err(Error::budget("oracle sequences", ORACLE_BUDGET as u64, cost.min(u64::MAX as f64) as u64));
    }
    let l = big_l(family)?;
    if max_len + 1 < l {
        return Err(Error::Precondition(format!("max_len {max_len} < L - 1 = {}", l - 1)));
    }
    let nonempty: Vec<ColorSet> = (1..1u32 << m).map(ColorSet).collect();
    let mut best = 0.0f64;
    let mut digits: Vec<usize> = Vec::with_capacity(max_len);
    for len in 1..=max_len {
        digits.clear();
        digits.resize(len, 0);
        'seq: loop {
            let sets: Vec<ColorSet> = digits.iter().map(|&d| nonempty[d]).collect();
            let profile = ChainProfile { sets };
            if template_validity_oracle(&profile.path_template(m)?, family)? {
                best = best.max(profile.omega(beta));
            }
            for d in digits.iter_mut().rev() {
                *d += 1;
                if *d < nonempty.len() {
                    continue 'seq;
                }
                *d = 0;
            }
            break;
        }
    }
    Ok(best)
}

/// `ω_crit(p)` for a probability vector: positive entries summing to at
/// most one.
pub fn expectation_exponent(family: &ForbiddenFamily, p: &[f64]) -> Result<f64> {
    if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(**v > 0.0 && **v <= 1.0)) {
        return Err(Error::Weights(format!(
            "p[{i}] = {v}: probabilities must lie in (0, 1]; drop zero-probability colors"
        )));
    }
    let total: f64 = p.iter().sum();
    if total > 1.0 + 1e-12 {
        return Err(Error::Weights(format!("probabilities sum to {total} > 1")));
    }
    Ok(omega_crit(family, &WeightVector::new(p.to_vec())?)?.omega_crit)
}
