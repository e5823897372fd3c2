//! Synthetic corpora and planted mixing laws.
//!
//! A [`MixingLaw`] stands in for "train a small model on this mixture and
//! measure its loss", so the whole sample → fit → search loop can be checked
//! against a known optimum.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::EmbeddingSet;
use crate::corpus::DocumentRecord;
use crate::error::{Error, Result};
use crate::mixture::{ensure_taxonomy, Mixture};
use crate::regression::{
    fit, fit_with_holdout, GbtParams, HoldoutReport, LossPredictor, MultiTargetPredictor, RunObservation,
    SurrogateModel,
};
use crate::rng::{self, StreamRng};
use crate::sampling::{check_cap_feasible, sample_config_mixtures, SamplerConfig};
use crate::search::{brute_force_search, multi_seed_search, SearchParams};
use crate::taxonomy::{Taxonomy, TaxonomyKind};

pub const DEFAULT_TOKEN_MEDIAN: f64 = 500.0;
pub const DEFAULT_TOKEN_SIGMA: f64 = 1.0;
pub const DEFAULT_LOG_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawKind {
    /// `sum_i c_i pi_i`
    Linear { coefficients: Vec<f64> },
    /// `sum_i c_i ln(pi_i + epsilon)`
    LogLinear { coefficients: Vec<f64>, epsilon: f64 },
    /// `sum_i s_i (pi_i - m_i)^2`
    QuadraticBowl { center: Vec<f64>, scale: Vec<f64> },
    /// `sum_i a_i pi_i + sum_ij b_ij pi_i pi_j`
    Interaction { linear: Vec<f64>, pairwise: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingLaw {
    /// Taxonomy specifier the law is defined over.
    pub taxonomy: String,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(flatten)]
    pub law: LawKind,
}

impl MixingLaw {
    pub fn new(taxonomy: &Taxonomy, law: LawKind) -> Result<Self> {
        let out = MixingLaw {
            taxonomy: taxonomy.label().to_string(),
            offset: 0.0,
            noise_sigma: 0.0,
            law,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn arity(&self) -> usize {
        match &self.law {
            LawKind::Linear { coefficients } | LawKind::LogLinear { coefficients, .. } => coefficients.len(),
            LawKind::QuadraticBowl { center, .. } => center.len(),
            LawKind::Interaction { linear, .. } => linear.len(),
        }
    }

    pub fn build_taxonomy(&self) -> Result<Arc<Taxonomy>> {
        Ok(Arc::new(Taxonomy::from_spec(&self.taxonomy)?))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        let n = self.arity();
        let tax = Taxonomy::from_spec(&self.taxonomy)?;
        if tax.arity() != n {
            return bad(format!(
                "law has {n} coefficients for taxonomy {} of arity {}",
                tax,
                tax.arity()
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) || !self.offset.is_finite() {
            return bad("noise sigma must be >= 0 and offset finite".into());
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match &self.law {
            LawKind::Linear { coefficients } if !finite(coefficients) => bad("non-finite coefficient".into()),
            LawKind::LogLinear { coefficients, epsilon } => {
                if !finite(coefficients) || !(*epsilon > 0.0 && epsilon.is_finite()) {
                    bad("log-linear law needs finite coefficients and epsilon > 0".into())
                } else {
                    Ok(())
                }
            }
            LawKind::QuadraticBowl { center, scale } => {
                if scale.len() != n || !finite(center) || scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                    bad("bowl needs finite center and positive scales of equal length".into())
                } else {
                    Ok(())
                }
            }
            LawKind::Interaction { pairwise, linear } => {
                if pairwise.len() != n || pairwise.iter().any(|r| r.len() != n || !finite(r)) || !finite(linear) {
                    bad("interaction matrix must be finite and square".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Noiseless value at raw weights.
    pub fn value(&self, pi: &[f64]) -> f64 {
        let core = match &self.law {
            LawKind::Linear { coefficients } => coefficients.iter().zip(pi).map(|(c, p)| c * p).sum::<f64>(),
            LawKind::LogLinear { coefficients, epsilon } => {
                coefficients.iter().zip(pi).map(|(c, p)| c * (p + epsilon).ln()).sum()
            }
            LawKind::QuadraticBowl { center, scale } => pi
                .iter()
                .zip(center)
                .zip(scale)
                .map(|((p, m), s)| s * (p - m) * (p - m))
                .sum(),
            LawKind::Interaction { linear, pairwise } => {
                let mut v: f64 = linear.iter().zip(pi).map(|(a, p)| a * p).sum();
                for (i, row) in pairwise.iter().enumerate() {
                    for (j, b) in row.iter().enumerate() {
                        v += b * pi[i] * pi[j];
                    }
                }
                v
            }
        };
        self.offset + core
    }
}

/// Law value at `mix` plus Gaussian noise of the law's sigma. Noiseless (and
/// `rng` untouched) when sigma is 0.
pub fn evaluate_law(law: &MixingLaw, mix: &Mixture, rng: &mut StreamRng) -> Result<f64> {
    if mix.arity() != law.arity() {
        return Err(Error::LengthMismatch(mix.arity(), law.arity()));
    }
    let v = law.value(mix.weights());
    if law.noise_sigma > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        Ok(v + law.noise_sigma * z)
    } else {
        Ok(v)
    }
}

/// Mean of several noiseless laws, usable wherever a fitted model is.
pub struct LawPredictor {
    taxonomy: Arc<Taxonomy>,
    laws: Vec<MixingLaw>,
}

impl LawPredictor {
    pub fn new(laws: Vec<MixingLaw>) -> Result<Self> {
        let first = laws
            .first()
            .ok_or_else(|| Error::InvalidSpec("need at least one law".into()))?;
        let taxonomy = first.build_taxonomy()?;
        for l in &laws {
            l.validate()?;
            ensure_taxonomy(&taxonomy, &l.build_taxonomy()?)?;
        }
        Ok(LawPredictor { taxonomy, laws })
    }
}

impl LossPredictor for LawPredictor {
    fn taxonomy(&self) -> &Arc<Taxonomy> {
        &self.taxonomy
    }

    fn predict_weights(&self, weights: &[f64]) -> f64 {
        self.laws.iter().map(|l| l.value(weights)).sum::<f64>() / self.laws.len() as f64
    }
}

fn upper_bounds(prior: &[f64], cap: f64) -> Vec<f64> {
    prior.iter().map(|p| (cap * p).min(1.0)).collect()
}

/// Greedy fill of the cheapest coordinates: exact for linear objectives over
/// the capped simplex.
fn linear_optimum(coefficients: &[f64], bounds: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..coefficients.len()).collect();
    order.sort_by(|&a, &b| coefficients[a].total_cmp(&coefficients[b]).then(a.cmp(&b)));
    let mut left = 1.0;
    let mut pi = vec![0.0; coefficients.len()];
    for i in order {
        let take = bounds[i].min(left);
        pi[i] = take;
        left -= take;
        if left <= 0.0 {
            break;
        }
    }
    pi
}

/// Projection of the bowl center onto the capped simplex in the scaled
/// metric: `pi_i = clamp(m_i - lambda / (2 s_i), 0, u_i)` with `lambda` set
/// by bisection so the weights sum to one.
fn bowl_optimum(center: &[f64], scale: &[f64], bounds: &[f64]) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        center
            .iter()
            .zip(scale)
            .zip(bounds)
            .map(|((m, s), u)| (m - lambda / (2.0 * s)).clamp(0.0, *u))
            .collect()
    };
    let sum = |lambda: f64| at(lambda).iter().sum::<f64>();
    let (mut lo, mut hi) = (-1.0, 1.0);
    while sum(lo) < 1.0 {
        lo *= 2.0;
    }
    while sum(hi) > 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimumMethod {
    Greedy,
    Projection,
    BruteForce,
    Search,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawOptimum {
    pub mixture: Mixture,
    pub value: f64,
    pub method: OptimumMethod,
}

/// Resolution of the lattice used when no closed form applies.
pub const OPTIMUM_RESOLUTION: f64 = 0.005;
pub const LATTICE_MAX_ARITY: usize = 4;

/// Minimizer of the averaged noiseless laws over `{pi : pi_i <= cap p_i}`.
/// Single linear and bowl laws are solved in closed form; otherwise a
/// lattice search for arity <= 4 and adaptive search beyond.
pub fn true_optimum(laws: &[MixingLaw], prior: &Mixture, cap: f64, search: &SearchParams) -> Result<LawOptimum> {
    let predictor = LawPredictor::new(laws.to_vec())?;
    ensure_taxonomy(predictor.taxonomy(), prior.taxonomy())?;
    check_cap_feasible(prior.weights(), prior.weights(), cap)?;
    let bounds = upper_bounds(prior.weights(), cap);
    let tax = prior.taxonomy().clone();
    let closed = match laws {
        [single] => match &single.law {
            LawKind::Linear { coefficients } => Some((linear_optimum(coefficients, &bounds), OptimumMethod::Greedy)),
            LawKind::QuadraticBowl { center, scale } => {
                Some((bowl_optimum(center, scale, &bounds), OptimumMethod::Projection))
            }
            _ => None,
        },
        _ => None,
    };
    if let Some((w, method)) = closed {
        let value = predictor.predict_weights(&w);
        return Ok(LawOptimum {
            mixture: Mixture::from_raw(tax, w),
            value,
            method,
        });
    }
    if prior.arity() <= LATTICE_MAX_ARITY {
        let (mixture, value) = brute_force_search(&predictor, prior, 0.0, cap, OPTIMUM_RESOLUTION)?;
        return Ok(LawOptimum {
            mixture,
            value,
            method: OptimumMethod::BruteForce,
        });
    }
    let params = SearchParams {
        kl_coeff: 0.0,
        cap,
        ..*search
    };
    let r = multi_seed_search(&predictor, prior, &params, &[params.seed])?;
    Ok(LawOptimum {
        mixture: r.mixture,
        value: r.value,
        method: OptimumMethod::Search,
    })
}

/// Evaluates every law on every mixture. Noise for law `l` on mixture `i`
/// comes from its own stream, so the result is order independent.
pub fn observe(laws: &[(String, MixingLaw)], mixtures: &[Mixture], seed: u64) -> Result<Vec<RunObservation>> {
    mixtures
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let mut losses = BTreeMap::new();
            for (l, (name, law)) in laws.iter().enumerate() {
                let mut rng = rng::stream(seed, rng::purpose::LAB_LAW, l as u64, i as u64);
                losses.insert(name.clone(), evaluate_law(law, m, &mut rng)?);
            }
            RunObservation::new(m.clone(), losses)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RegmixConfig {
    pub gbt: GbtParams,
    pub search: SearchParams,
    pub seeds: Vec<u64>,
    /// Observations held out (from the end) for validation; 0 fits on all.
    pub holdout: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetValidation {
    pub target: String,
    #[serde(flatten)]
    pub report: HoldoutReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegmixReport {
    pub predicted: Mixture,
    /// Surrogate objective at the predicted mixture.
    pub search_value: f64,
    /// Averaged noiseless law value at the predicted mixture.
    pub law_value: f64,
    pub optimum: LawOptimum,
    /// `law_value - optimum.value`.
    pub gap: f64,
    pub validation: Vec<TargetValidation>,
    pub models: Vec<SurrogateModel>,
}

/// Fits one surrogate per law, searches the averaged surrogate and scores the
/// result against the averaged law's true optimum.
pub fn regmix_from_observations(
    laws: &[(String, MixingLaw)],
    observations: &[RunObservation],
    prior: &Mixture,
    cfg: &RegmixConfig,
) -> Result<RegmixReport> {
    let mut models = Vec::with_capacity(laws.len());
    let mut validation = Vec::new();
    for (name, _) in laws {
        if cfg.holdout > 0 {
            let (m, report) = fit_with_holdout(observations, name, &cfg.gbt, cfg.holdout)?;
            validation.push(TargetValidation {
                target: name.clone(),
                report,
            });
            models.push(m);
        } else {
            models.push(fit(observations, name, &cfg.gbt)?);
        }
    }
    let surrogate = MultiTargetPredictor::new(models.clone())?;
    let found = multi_seed_search(&surrogate, prior, &cfg.search, &cfg.seeds)?;
    let plain: Vec<MixingLaw> = laws.iter().map(|(_, l)| l.clone()).collect();
    let truth = LawPredictor::new(plain.clone())?;
    let law_value = truth.predict_weights(found.mixture.weights());
    let optimum = true_optimum(&plain, prior, cfg.search.cap, &cfg.search)?;
    Ok(RegmixReport {
        gap: law_value - optimum.value,
        predicted: found.mixture,
        search_value: found.value,
        law_value,
        optimum,
        validation,
        models,
    })
}

/// Sample configuration mixtures → evaluate laws → fit → search → gap.
pub fn end_to_end_regmix(
    laws: &[(String, MixingLaw)],
    sampler: &SamplerConfig,
    corpus_prior: &Mixture,
    cfg: &RegmixConfig,
) -> Result<(Vec<RunObservation>, RegmixReport)> {
    let mixtures: Vec<Mixture> = sample_config_mixtures(sampler, corpus_prior)?
        .into_iter()
        .map(|s| s.mixture)
        .collect();
    let observations = observe(laws, &mixtures, sampler.seed)?;
    let report = regmix_from_observations(laws, &observations, corpus_prior, cfg)?;
    Ok((observations, report))
}

/// Planted per-document score: `topic_offsets[t] + format_offsets[f] +
/// noise_sigma * z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    pub name: String,
    pub topic_offsets: Vec<f64>,
    pub format_offsets: Vec<f64>,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone)]
pub struct LabCorpusSpec {
    /// Distribution over topic × format cells.
    pub joint: Mixture,
    pub n_docs: usize,
    pub token_median: f64,
    pub token_sigma: f64,
    pub scores: Vec<ScoreModel>,
}

impl LabCorpusSpec {
    pub fn new(joint: Mixture, n_docs: usize) -> Self {
        LabCorpusSpec {
            joint,
            n_docs,
            token_median: DEFAULT_TOKEN_MEDIAN,
            token_sigma: DEFAULT_TOKEN_SIGMA,
            scores: Vec::new(),
        }
    }

    fn factor_arities(&self) -> Result<(usize, usize)> {
        let tax = self.joint.taxonomy();
        match (tax.kind(), tax.factors()) {
            (TaxonomyKind::Product, Some((a, b))) => Ok((a.arity(), b.arity())),
            _ => Err(Error::InvalidSpec(format!(
                "joint must be over a product taxonomy, got {tax}"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (nt, nf) = self.factor_arities()?;
        if self.n_docs == 0 {
            return Err(Error::InvalidSpec("n_docs must be positive".into()));
        }
        if !(self.token_median >= 1.0 && self.token_median.is_finite())
            || !(self.token_sigma >= 0.0 && self.token_sigma.is_finite())
        {
            return Err(Error::InvalidSpec("token median must be >= 1 and sigma >= 0".into()));
        }
        for s in &self.scores {
            if s.topic_offsets.len() != nt || s.format_offsets.len() != nf {
                return Err(Error::InvalidSpec(format!(
                    "score {:?} offsets do not match the taxonomy",
                    s.name
                )));
            }
            if !(s.noise_sigma >= 0.0 && s.noise_sigma.is_finite())
                || s.topic_offsets.iter().chain(&s.format_offsets).any(|x| !x.is_finite())
            {
                return Err(Error::InvalidSpec(format!("score {:?} has invalid parameters", s.name)));
            }
        }
        Ok(())
    }
}

/// Draws `n_docs` records. Record `i` depends only on `(seed, i)`.
pub fn generate_corpus(spec: &LabCorpusSpec, seed: u64) -> Result<Vec<DocumentRecord>> {
    spec.validate()?;
    let (_, nf) = spec.factor_arities()?;
    let mut cdf = Vec::with_capacity(spec.joint.arity());
    let mut acc = 0.0;
    for w in spec.joint.weights() {
        acc += w;
        cdf.push(acc);
    }
    let last_nonzero = spec
        .joint
        .weights()
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("mixture has mass");
    let width = spec.n_docs.saturating_sub(1).to_string().len().max(6);
    let log_median = spec.token_median.ln();
    Ok((0..spec.n_docs)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, rng::purpose::LAB_CORPUS, 0, i as u64);
            let u: f64 = rng.random::<f64>() * acc;
            let cell = cdf.partition_point(|&c| c <= u).min(last_nonzero);
            let (topic, format) = (cell / nf, cell % nf);
            let z: f64 = rng.sample(StandardNormal);
            let tokens = (log_median + spec.token_sigma * z).exp().round().max(1.0) as u64;
            let mut rec = DocumentRecord::new(format!("doc-{i:0width$}"), tokens, topic, format);
            for s in &spec.scores {
                let z: f64 = rng.sample(StandardNormal);
                let v = s.topic_offsets[topic] + s.format_offsets[format] + s.noise_sigma * z;
                rec = rec.with_score(&s.name, v);
            }
            rec
        })
        .collect())
}

fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Expected token shares after keeping the globally top-scoring
/// `keep_fraction` of documents, when domain `d` holds `domain_probs[d]` of
/// the tokens and its scores are `N(offsets[d], sigma^2)` independent of
/// document length.
pub fn expected_top_shares(domain_probs: &[f64], offsets: &[f64], sigma: f64, keep_fraction: f64) -> Result<Vec<f64>> {
    if domain_probs.len() != offsets.len() {
        return Err(Error::LengthMismatch(domain_probs.len(), offsets.len()));
    }
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) || !(sigma > 0.0) {
        return Err(Error::InvalidSpec(
            "keep fraction in (0, 1] and sigma > 0 required".into(),
        ));
    }
    let kept = |theta: f64| -> Vec<f64> {
        domain_probs
            .iter()
            .zip(offsets)
            .map(|(p, o)| p * normal_sf((theta - o) / sigma))
            .collect()
    };
    let total = |theta: f64| kept(theta).iter().sum::<f64>();
    let lo_off = offsets.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_off = offsets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo_off - 40.0 * sigma, hi_off + 40.0 * sigma);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > keep_fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = kept(0.5 * (lo + hi));
    let s: f64 = k.iter().sum();
    Ok(k.into_iter().map(|x| x / s).collect())
}

/// Embeddings `[topic_scale * onehot(topic), format_scale * onehot(format)]`
/// plus isotropic Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub topic_scale: f64,
    pub format_scale: f64,
    pub noise_sigma: f64,
}

pub fn generate_embeddings(
    records: &[DocumentRecord],
    model: &EmbeddingModel,
    n_topics: usize,
    n_formats: usize,
    seed: u64,
) -> Result<EmbeddingSet> {
    let dim = n_topics + n_formats;
    let rows: Vec<Vec<f32>> = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let mut rng = rng::stream(seed, rng::purpose::LAB_EMBEDDINGS, 0, i as u64);
            let mut v = vec![0.0f64; dim];
            v[r.topic] += model.topic_scale;
            v[n_topics + r.format] += model.format_scale;
            for x in v.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *x += model.noise_sigma * z;
            }
            v.into_iter().map(|x| x as f32).collect()
        })
        .collect();
    let ids = records.iter().map(|r| r.doc_id.clone()).collect();
    EmbeddingSet::new(ids, dim, rows.concat())
}
