//! Hierarchical Dirichlet sampling of training mixtures.
//!
//! A mixture is drawn as `log(alpha) ~ Uniform(low, high)` followed by
//! `pi ~ Dirichlet(alpha * prior)`. Gamma variates are produced in log space
//! so that tiny concentrations (which underflow a plain Gamma draw) still
//! yield a valid point on the simplex.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{temper, Mixture};
use crate::rng::{self, StreamRng};

pub const DEFAULT_TAU: f64 = 2.0;
pub const DEFAULT_CONFIG_MIXTURES: usize = 512;
/// Rejection attempts per mixture before a cap is declared infeasible.
pub const MAX_CAP_ATTEMPTS: usize = 10_000;

pub fn default_config_log_alpha() -> (f64, f64) {
    (0.1f64.ln(), 10f64.ln())
}

/// Log of a Gamma(shape, 1) variate.
pub fn sample_log_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        Gamma::new(shape, 1.0).expect("shape is positive").sample(rng).ln()
    } else {
        // Gamma(a) = Gamma(a + 1) * U^(1/a)
        let u: f64 = 1.0 - rng.random::<f64>();
        sample_log_gamma(shape + 1.0, rng) + u.ln() / shape
    }
}

/// Dirichlet draw via normalized Gamma variates. Zero entries of `alpha`
/// are treated as absent categories and stay exactly zero.
pub(crate) fn dirichlet_weights<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            if a > 0.0 {
                sample_log_gamma(a, rng)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    w
}

pub fn sample_dirichlet<R: Rng + ?Sized>(
    taxonomy: std::sync::Arc<crate::Taxonomy>,
    alpha: &[f64],
    rng: &mut R,
) -> Result<Mixture> {
    if alpha.len() != taxonomy.arity() {
        return Err(Error::InvalidAlpha(format!(
            "{} parameters for arity {}",
            alpha.len(),
            taxonomy.arity()
        )));
    }
    if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::InvalidAlpha(format!("parameter {a} is not positive")));
    }
    Ok(Mixture::from_raw(taxonomy, dirichlet_weights(alpha, rng)))
}

/// Whether `pi_i <= cap * reference_i (+ slack)` for every category.
pub fn within_cap(pi: &[f64], reference: &[f64], cap: f64, slack: f64) -> bool {
    pi.iter().zip(reference).all(|(&x, &r)| x <= cap * r + slack)
}

pub(crate) fn check_cap_feasible(support: &[f64], reference: &[f64], cap: f64) -> Result<()> {
    if !(cap.is_finite() && cap > 0.0) && cap != f64::INFINITY {
        return Err(Error::CapInfeasible(format!("cap {cap} is not positive")));
    }
    let mass: f64 = support
        .iter()
        .zip(reference)
        .filter(|(s, _)| **s > 0.0)
        .map(|(_, r)| r)
        .sum();
    if cap * mass < 1.0 - 1e-12 {
        return Err(Error::CapInfeasible(format!(
            "cap {cap} times reference mass {mass} on the prior support is below 1"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// Already-tempered prior.
    pub prior: Mixture,
    pub n_mixtures: usize,
    pub log_alpha_range: (f64, f64),
    /// Maximum ratio to the untempered reference, if any.
    pub cap: Option<f64>,
    pub seed: u64,
}

impl SamplerConfig {
    /// Defaults: 512 mixtures, `log alpha` in `(ln 0.1, ln 10)`, no cap.
    pub fn new(prior: Mixture, seed: u64) -> Self {
        SamplerConfig {
            prior,
            n_mixtures: DEFAULT_CONFIG_MIXTURES,
            log_alpha_range: default_config_log_alpha(),
            cap: None,
            seed,
        }
    }

    /// Tempers `corpus` by `tau` to form the prior.
    pub fn from_corpus(corpus: &Mixture, tau: f64, seed: u64) -> Result<Self> {
        Ok(Self::new(temper(corpus, tau)?, seed))
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.log_alpha_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "log alpha range ({lo}, {hi}) must satisfy low < high"
            )));
        }
        if self.n_mixtures == 0 {
            return Err(Error::InvalidConfig("n_mixtures must be >= 1".into()));
        }
        if let Some(cap) = self.cap {
            if !(cap > 1.0) {
                return Err(Error::InvalidConfig(format!("cap {cap} must exceed 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledMixture {
    pub index: usize,
    pub alpha: f64,
    pub attempts: usize,
    pub mixture: Mixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleManifestEntry {
    pub index: usize,
    pub alpha: f64,
    pub attempts: usize,
    pub file: String,
}

/// Draws `log alpha` uniformly and then `Dirichlet(alpha * prior)`.
pub(crate) fn hierarchical_draw(prior: &[f64], log_alpha_range: (f64, f64), rng: &mut StreamRng) -> (f64, Vec<f64>) {
    let (lo, hi) = log_alpha_range;
    let alpha = rng.random_range(lo..hi).exp();
    let params: Vec<f64> = prior.iter().map(|&p| alpha * p).collect();
    (alpha, dirichlet_weights(&params, rng))
}

/// Mixture `index` of the configured sample. Independent of every other
/// index.
pub fn sample_config_mixture(cfg: &SamplerConfig, reference: &Mixture, index: usize) -> Result<SampledMixture> {
    let mut rng = rng::stream(cfg.seed, rng::purpose::CONFIG_MIXTURES, 0, index as u64);
    let prior = cfg.prior.weights();
    for attempt in 1..=MAX_CAP_ATTEMPTS {
        let (alpha, w) = hierarchical_draw(prior, cfg.log_alpha_range, &mut rng);
        let ok = match cfg.cap {
            Some(cap) => within_cap(&w, reference.weights(), cap, 0.0),
            None => true,
        };
        if ok {
            return Ok(SampledMixture {
                index,
                alpha,
                attempts: attempt,
                mixture: Mixture::from_raw(cfg.prior.taxonomy().clone(), w),
            });
        }
    }
    Err(Error::CapInfeasible(format!(
        "mixture {index} rejected {MAX_CAP_ATTEMPTS} times"
    )))
}

pub fn sample_config_mixtures(cfg: &SamplerConfig, reference: &Mixture) -> Result<Vec<SampledMixture>> {
    cfg.validate()?;
    cfg.prior.ensure_same_taxonomy(reference)?;
    if let Some(cap) = cfg.cap {
        check_cap_feasible(cfg.prior.weights(), reference.weights(), cap)?;
    }
    (0..cfg.n_mixtures)
        .into_par_iter()
        .map(|i| sample_config_mixture(cfg, reference, i))
        .collect()
}
