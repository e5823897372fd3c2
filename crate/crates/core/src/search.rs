//! Adaptive simplex search for the mixture minimizing a predicted loss.
//!
//! The objective is `f(pi) + gamma * KL(p || pi)` where `p` is the corpus
//! prior. Each step draws `N` cap-feasible candidates from a hierarchical
//! Dirichlet around the current search prior `w`, line-searches between `w`
//! and the best candidate, moves `w` towards the winner with smoothing `eta`
//! and keeps the best mixture seen so far.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{ensure_taxonomy, kl_weights, Mixture};
use crate::regression::LossPredictor;
use crate::rng;
use crate::sampling::{check_cap_feasible, hierarchical_draw, within_cap};

pub const DEFAULT_SEEDS: usize = 2;
/// Draws allowed per accepted candidate before the slot is given up.
pub const MAX_ATTEMPTS_PER_CANDIDATE: usize = 100;
/// Slack for cap checks on interpolated mixtures.
pub const CAP_SLACK: f64 = 1e-12;
pub const BRUTE_FORCE_MAX_ARITY: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchParams {
    pub n_per_step: usize,
    pub steps: usize,
    pub kl_coeff: f64,
    pub smoothing: f64,
    pub cap: f64,
    pub log_alpha_range: (f64, f64),
    pub line_search_points: usize,
    pub seed: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            n_per_step: 500_000,
            steps: 15,
            kl_coeff: 0.002,
            smoothing: 0.2,
            cap: 6.5,
            log_alpha_range: (1f64.ln(), 1000f64.ln()),
            line_search_points: 500,
            seed: 0,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_per_step == 0 || self.steps == 0 || self.line_search_points == 0 {
            return bad("n_per_step, steps and line_search_points must be positive".into());
        }
        if !(self.kl_coeff >= 0.0 && self.kl_coeff.is_finite()) {
            return bad(format!("KL coefficient {} must be >= 0", self.kl_coeff));
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return bad(format!("smoothing {} must lie in (0, 1]", self.smoothing));
        }
        if !(self.cap > 0.0) {
            return bad(format!("cap {} must be positive", self.cap));
        }
        let (lo, hi) = self.log_alpha_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad(format!("log alpha range ({lo}, {hi}) must satisfy low < high"));
        }
        Ok(())
    }
}

/// `f(pi) + gamma * KL(p || pi)` on raw weights. With `gamma == 0` the KL
/// term is skipped entirely, so zero-support candidates stay finite.
pub fn objective_weights<P: LossPredictor + ?Sized>(predictor: &P, prior: &[f64], gamma: f64, pi: &[f64]) -> f64 {
    let mut value = predictor.predict_weights(pi);
    if gamma > 0.0 {
        value += gamma * kl_weights(prior, pi);
    }
    if value.is_nan() {
        f64::INFINITY
    } else {
        value
    }
}

pub fn objective<P: LossPredictor + ?Sized>(predictor: &P, prior: &Mixture, gamma: f64, pi: &Mixture) -> Result<f64> {
    ensure_taxonomy(predictor.taxonomy(), prior.taxonomy())?;
    ensure_taxonomy(prior.taxonomy(), pi.taxonomy())?;
    Ok(objective_weights(predictor, prior.weights(), gamma, pi.weights()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub best_candidate: Vec<f64>,
    pub best_candidate_value: f64,
    pub line_search_beta: f64,
    pub w_tilde: Vec<f64>,
    pub w_tilde_value: f64,
    pub w: Vec<f64>,
    pub best_value: f64,
    pub cap_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub mixture: Mixture,
    pub value: f64,
    pub seed: u64,
    pub trace: Vec<StepTrace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchResult {
    pub mixture: Mixture,
    pub value: f64,
    pub beta: f64,
    pub cap_violations: usize,
}

/// Evaluates `beta_j * w + (1 - beta_j) * w_tilde` on an evenly spaced grid
/// of `points` values in `[0, 1]` (both ends included) and returns the
/// argmin, ties going to the smaller `j`. Interpolants violating the cap
/// against `prior` are counted and skipped.
pub fn line_search<P: LossPredictor + ?Sized>(
    predictor: &P,
    prior: &Mixture,
    gamma: f64,
    cap: f64,
    w: &Mixture,
    w_tilde: &Mixture,
    points: usize,
) -> Result<LineSearchResult> {
    ensure_taxonomy(predictor.taxonomy(), prior.taxonomy())?;
    w.ensure_same_taxonomy(w_tilde)?;
    prior.ensure_same_taxonomy(w)?;
    if points == 0 {
        return Err(Error::InvalidConfig("line search needs at least one point".into()));
    }
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    let mut violations = 0;
    let mut pi = vec![0.0; w.arity()];
    for j in 0..points {
        let beta = if points == 1 {
            0.0
        } else {
            j as f64 / (points - 1) as f64
        };
        for ((x, a), b) in pi.iter_mut().zip(w.weights()).zip(w_tilde.weights()) {
            *x = b + beta * (a - b);
        }
        let value = if within_cap(&pi, prior.weights(), cap, CAP_SLACK) {
            objective_weights(predictor, prior.weights(), gamma, &pi)
        } else {
            violations += 1;
            f64::INFINITY
        };
        if best.as_ref().is_none_or(|(v, _, _)| value < *v) {
            best = Some((value, beta, pi.clone()));
        }
    }
    let (value, beta, weights) = best.expect("at least one point");
    Ok(LineSearchResult {
        mixture: Mixture::from_raw(w.taxonomy().clone(), weights),
        value,
        beta,
        cap_violations: violations,
    })
}

#[derive(Debug, Clone)]
struct StepBest {
    value: f64,
    index: usize,
    weights: Option<Vec<f64>>,
    accepted: usize,
    rejected: usize,
}

impl StepBest {
    fn empty() -> Self {
        StepBest {
            value: f64::INFINITY,
            index: usize::MAX,
            weights: None,
            accepted: 0,
            rejected: 0,
        }
    }

    /// Associative and commutative: the winner is the smallest
    /// `(value, index)`, independent of reduction order.
    fn combine(a: StepBest, b: StepBest) -> StepBest {
        let accepted = a.accepted + b.accepted;
        let rejected = a.rejected + b.rejected;
        let a_wins = match (&a.weights, &b.weights) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(_), Some(_)) => a.value.total_cmp(&b.value).then(a.index.cmp(&b.index)).is_le(),
        };
        let winner = if a_wins { a } else { b };
        StepBest {
            accepted,
            rejected,
            ..winner
        }
    }
}

fn draw_step<P: LossPredictor + ?Sized>(
    predictor: &P,
    prior: &Mixture,
    w: &[f64],
    params: &SearchParams,
    step: usize,
) -> StepBest {
    (0..params.n_per_step)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(params.seed, rng::purpose::SEARCH, step as u64, i as u64);
            let mut rejected = 0;
            for _ in 0..MAX_ATTEMPTS_PER_CANDIDATE {
                let (_, pi) = hierarchical_draw(w, params.log_alpha_range, &mut rng);
                if within_cap(&pi, prior.weights(), params.cap, 0.0) {
                    return StepBest {
                        value: objective_weights(predictor, prior.weights(), params.kl_coeff, &pi),
                        index: i,
                        weights: Some(pi),
                        accepted: 1,
                        rejected,
                    };
                }
                rejected += 1;
            }
            StepBest {
                rejected,
                ..StepBest::empty()
            }
        })
        .reduce(StepBest::empty, StepBest::combine)
}

pub fn adaptive_search<P: LossPredictor + ?Sized>(
    predictor: &P,
    prior: &Mixture,
    params: &SearchParams,
) -> Result<SearchResult> {
    params.validate()?;
    ensure_taxonomy(predictor.taxonomy(), prior.taxonomy())?;
    check_cap_feasible(prior.weights(), prior.weights(), params.cap)?;
    let tax = prior.taxonomy().clone();
    let gamma = params.kl_coeff;

    let mut best = prior.clone();
    let mut best_value = objective_weights(predictor, prior.weights(), gamma, prior.weights());
    let mut w = prior.clone();
    let mut trace = Vec::with_capacity(params.steps);

    for step in 1..=params.steps {
        let drawn = draw_step(predictor, prior, w.weights(), params, step);
        let candidate = drawn.weights.ok_or(Error::NoFeasibleCandidate(step))?;
        let candidate = Mixture::from_raw(tax.clone(), candidate);
        let ls = line_search(
            predictor,
            prior,
            gamma,
            params.cap,
            &w,
            &candidate,
            params.line_search_points,
        )?;
        let eta = params.smoothing;
        w = ls.mixture.lerp(&w, eta)?;
        if ls.value < best_value {
            best = ls.mixture.clone();
            best_value = ls.value;
        }
        trace.push(StepTrace {
            step,
            accepted: drawn.accepted,
            rejected: drawn.rejected,
            best_candidate: candidate.weights().to_vec(),
            best_candidate_value: drawn.value,
            line_search_beta: ls.beta,
            w_tilde: ls.mixture.weights().to_vec(),
            w_tilde_value: ls.value,
            w: w.weights().to_vec(),
            best_value,
            cap_violations: ls.cap_violations,
        });
    }
    Ok(SearchResult {
        mixture: best,
        value: best_value,
        seed: params.seed,
        trace,
    })
}

/// Runs [`adaptive_search`] once per seed and keeps the lowest objective
/// (first seed on ties).
pub fn multi_seed_search<P: LossPredictor + ?Sized>(
    predictor: &P,
    prior: &Mixture,
    params: &SearchParams,
    seeds: &[u64],
) -> Result<SearchResult> {
    let mut best: Option<SearchResult> = None;
    for &seed in seeds {
        let run = adaptive_search(predictor, prior, &SearchParams { seed, ..*params })?;
        if best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    best.ok_or_else(|| Error::InvalidConfig("multi-seed search needs at least one seed".into()))
}

/// `count` consecutive seeds starting at `base`.
pub fn seed_list(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

/// Exhaustive search over the simplex lattice with spacing `resolution`,
/// restricted to `pi_i <= cap * p_i`. Ties go to the lexicographically
/// smallest lattice point.
pub fn brute_force_search<P: LossPredictor + ?Sized>(
    predictor: &P,
    prior: &Mixture,
    gamma: f64,
    cap: f64,
    resolution: f64,
) -> Result<(Mixture, f64)> {
    ensure_taxonomy(predictor.taxonomy(), prior.taxonomy())?;
    let d = prior.arity();
    if d > BRUTE_FORCE_MAX_ARITY {
        return Err(Error::ArityTooLarge {
            arity: d,
            max: BRUTE_FORCE_MAX_ARITY,
        });
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "resolution {resolution} must lie in (0, 1]"
        )));
    }
    let m = (1.0 / resolution).round() as usize;
    let mut counts = vec![0usize; d];
    let mut pi = vec![0.0; d];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let p = prior.weights();
    let mut visit = |counts: &[usize]| {
        for (x, &c) in pi.iter_mut().zip(counts) {
            *x = c as f64 / m as f64;
        }
        if !within_cap(&pi, p, cap, CAP_SLACK) {
            return;
        }
        let v = objective_weights(predictor, p, gamma, &pi);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, pi.clone()));
        }
    };
    enumerate_compositions(m, 0, &mut counts, &mut visit);
    let (value, weights) = best.ok_or_else(|| Error::CapInfeasible("no lattice point satisfies the cap".into()))?;
    Ok((Mixture::from_raw(prior.taxonomy().clone(), weights), value))
}

fn enumerate_compositions(remaining: usize, pos: usize, counts: &mut [usize], visit: &mut impl FnMut(&[usize])) {
    if pos + 1 == counts.len() {
        counts[pos] = remaining;
        visit(counts);
        return;
    }
    for c in 0..=remaining {
        counts[pos] = c;
        enumerate_compositions(remaining - c, pos + 1, counts, visit);
    }
}
