//! Mixture-to-loss surrogate models.
//!
//! One boosted tree ensemble is fitted per target task. Features are the raw
//! mixture weights in taxonomy order.

mod gbt;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use gbt::{GbtParams, GbtRegressor, Node, RegressionTree};

use crate::error::{Error, Result};
use crate::mixture::{ensure_taxonomy, Mixture, MixtureFile};
use crate::taxonomy::Taxonomy;

/// Anything that maps a mixture over a fixed taxonomy to a predicted loss.
pub trait LossPredictor: Sync {
    fn taxonomy(&self) -> &Arc<Taxonomy>;

    /// Prediction for raw weights in taxonomy order.
    fn predict_weights(&self, weights: &[f64]) -> f64;

    fn predict(&self, mix: &Mixture) -> Result<f64> {
        ensure_taxonomy(self.taxonomy(), mix.taxonomy())?;
        Ok(self.predict_weights(mix.weights()))
    }
}

impl<P: LossPredictor + ?Sized> LossPredictor for &P {
    fn taxonomy(&self) -> &Arc<Taxonomy> {
        (**self).taxonomy()
    }
    fn predict_weights(&self, weights: &[f64]) -> f64 {
        (**self).predict_weights(weights)
    }
}

/// Wraps a closure as a predictor.
pub struct FnPredictor<F> {
    taxonomy: Arc<Taxonomy>,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnPredictor<F> {
    pub fn new(taxonomy: Arc<Taxonomy>, f: F) -> Self {
        FnPredictor { taxonomy, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> LossPredictor for FnPredictor<F> {
    fn taxonomy(&self) -> &Arc<Taxonomy> {
        &self.taxonomy
    }
    fn predict_weights(&self, weights: &[f64]) -> f64 {
        (self.f)(weights)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunObservation {
    pub mixture: Mixture,
    pub losses: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunObservationLine {
    pub mixture: MixtureFile,
    pub losses: BTreeMap<String, f64>,
}

impl RunObservation {
    pub fn new(mixture: Mixture, losses: BTreeMap<String, f64>) -> Result<Self> {
        if losses.is_empty() {
            return Err(Error::InsufficientData("observation without losses".into()));
        }
        if let Some((k, v)) = losses.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("loss {k} = {v} is not finite")));
        }
        Ok(RunObservation { mixture, losses })
    }

    pub fn to_line(&self) -> RunObservationLine {
        RunObservationLine {
            mixture: self.mixture.to_file(),
            losses: self.losses.clone(),
        }
    }

    pub fn from_line(line: &RunObservationLine) -> Result<Self> {
        Self::new(Mixture::from_file(&line.mixture)?, line.losses.clone())
    }
}

/// Parses JSONL observations (blank lines ignored).
pub fn parse_observations(text: &str) -> Result<Vec<RunObservation>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let line: RunObservationLine = serde_json::from_str(l).map_err(|e| Error::MalformedRecord {
                line: i + 1,
                reason: e.to_string(),
            })?;
            RunObservation::from_line(&line)
        })
        .collect()
}

pub const MODEL_FORMAT: &str = "corpus-mixer/gbt-surrogate";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateFile {
    pub format: String,
    pub version: u32,
    pub taxonomy: String,
    pub target: String,
    pub feature_names: Vec<String>,
    pub n_observations: usize,
    pub params: GbtParams,
    pub model: GbtRegressor,
}

#[derive(Debug, Clone)]
pub struct SurrogateModel {
    taxonomy: Arc<Taxonomy>,
    target: String,
    n_observations: usize,
    params: GbtParams,
    regressor: GbtRegressor,
}

impl PartialEq for SurrogateModel {
    fn eq(&self, other: &Self) -> bool {
        *self.taxonomy == *other.taxonomy
            && self.target == other.target
            && self.n_observations == other.n_observations
            && self.params == other.params
            && self.regressor == other.regressor
    }
}

impl SurrogateModel {
    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn n_observations(&self) -> usize {
        self.n_observations
    }

    pub fn params(&self) -> &GbtParams {
        &self.params
    }

    pub fn regressor(&self) -> &GbtRegressor {
        &self.regressor
    }

    pub fn to_file(&self) -> SurrogateFile {
        SurrogateFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            taxonomy: self.taxonomy.label().to_string(),
            target: self.target.clone(),
            feature_names: self.taxonomy.names().to_vec(),
            n_observations: self.n_observations,
            params: self.params,
            model: self.regressor.clone(),
        }
    }

    pub fn from_file(file: SurrogateFile) -> Result<Self> {
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        let taxonomy = Arc::new(Taxonomy::from_spec(&file.taxonomy)?);
        if file.feature_names != taxonomy.names() || file.model.n_features != taxonomy.arity() {
            return Err(Error::InvalidConfig(
                "model feature order does not match its taxonomy".into(),
            ));
        }
        file.model.check()?;
        Ok(SurrogateModel {
            taxonomy,
            target: file.target,
            n_observations: file.n_observations,
            params: file.params,
            regressor: file.model,
        })
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string(&self.to_file()).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(s)?)
    }
}

impl LossPredictor for SurrogateModel {
    fn taxonomy(&self) -> &Arc<Taxonomy> {
        &self.taxonomy
    }
    fn predict_weights(&self, weights: &[f64]) -> f64 {
        self.regressor.predict(weights)
    }
}

fn canonical_key(weights: &[f64], loss: f64) -> Vec<u8> {
    weights
        .iter()
        .chain(std::iter::once(&loss))
        .flat_map(|w| w.to_bits().to_be_bytes())
        .collect()
}

/// Fits a surrogate for `target`. Observations lacking the target are
/// ignored; the rest are put in canonical (byte) order first, so the result
/// does not depend on input order.
pub fn fit(observations: &[RunObservation], target: &str, params: &GbtParams) -> Result<SurrogateModel> {
    let with_target: Vec<(&Mixture, f64)> = observations
        .iter()
        .filter_map(|o| o.losses.get(target).map(|&l| (&o.mixture, l)))
        .collect();
    if with_target.is_empty() {
        return Err(Error::TargetMissing(target.to_string()));
    }
    if with_target.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} observation(s) for target {target}",
            with_target.len()
        )));
    }
    let taxonomy = with_target[0].0.taxonomy().clone();
    for (m, _) in &with_target {
        ensure_taxonomy(&taxonomy, m.taxonomy())?;
    }
    let mut keyed: Vec<(Vec<u8>, &[f64], f64)> = with_target
        .iter()
        .map(|(m, l)| (canonical_key(m.weights(), *l), m.weights(), *l))
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    let rows: Vec<Vec<f64>> = keyed.iter().map(|(_, w, _)| w.to_vec()).collect();
    let ys: Vec<f64> = keyed.iter().map(|(_, _, l)| *l).collect();
    let regressor = GbtRegressor::fit(&rows, &ys, params)?;
    Ok(SurrogateModel {
        taxonomy,
        target: target.to_string(),
        n_observations: rows.len(),
        params: *params,
        regressor,
    })
}

pub fn predict(model: &SurrogateModel, mix: &Mixture) -> Result<f64> {
    model.predict(mix)
}

/// Unweighted mean of several single-target surrogates.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTargetPredictor {
    models: Vec<SurrogateModel>,
}

impl MultiTargetPredictor {
    pub fn new(models: Vec<SurrogateModel>) -> Result<Self> {
        let first = models
            .first()
            .ok_or_else(|| Error::InvalidConfig("no models to average".into()))?;
        for m in &models[1..] {
            ensure_taxonomy(&first.taxonomy, &m.taxonomy)?;
        }
        Ok(MultiTargetPredictor { models })
    }

    pub fn models(&self) -> &[SurrogateModel] {
        &self.models
    }
}

impl LossPredictor for MultiTargetPredictor {
    fn taxonomy(&self) -> &Arc<Taxonomy> {
        &self.models[0].taxonomy
    }
    fn predict_weights(&self, weights: &[f64]) -> f64 {
        let sum: f64 = self.models.iter().map(|m| m.predict_weights(weights)).sum();
        sum / self.models.len() as f64
    }
}

pub fn fit_multi(
    observations: &[RunObservation],
    targets: &[&str],
    params: &GbtParams,
) -> Result<MultiTargetPredictor> {
    let models = targets
        .iter()
        .map(|t| fit(observations, t, params))
        .collect::<Result<Vec<_>>>()?;
    MultiTargetPredictor::new(models)
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of average ranks. Returns
/// 0 when either sequence is constant.
pub fn spearman(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch(predicted.len(), actual.len()));
    }
    if predicted.len() < 2 {
        return Err(Error::InsufficientData("spearman needs at least 2 points".into()));
    }
    let a = average_ranks(predicted);
    let b = average_ranks(actual);
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(0.0);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub train: usize,
    pub holdout: usize,
    pub spearman: f64,
}

/// Fits on all but the last `holdout` observations and reports the Spearman
/// correlation on the held-out ones.
pub fn fit_with_holdout(
    observations: &[RunObservation],
    target: &str,
    params: &GbtParams,
    holdout: usize,
) -> Result<(SurrogateModel, HoldoutReport)> {
    if holdout + 2 > observations.len() || holdout < 2 {
        return Err(Error::InsufficientData(format!(
            "cannot hold out {holdout} of {} observations",
            observations.len()
        )));
    }
    let split = observations.len() - holdout;
    let model = fit(&observations[..split], target, params)?;
    let (pred, actual): (Vec<f64>, Vec<f64>) = observations[split..]
        .iter()
        .filter_map(|o| {
            o.losses
                .get(target)
                .map(|&l| (model.predict_weights(o.mixture.weights()), l))
        })
        .unzip();
    let rho = spearman(&pred, &actual)?;
    Ok((
        model,
        HoldoutReport {
            train: split,
            holdout: pred.len(),
            spearman: rho,
        },
    ))
}
