//! Pipeline-wide defaults and the composed quality-within-domain selection.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cluster::KMeansParams;
use crate::corpus::{CorpusIndex, Weighting};
use crate::error::{Error, Result};
use crate::mixture::{product_mixture, Mixture};
use crate::regression::GbtParams;
use crate::sampling::{default_config_log_alpha, DEFAULT_CONFIG_MIXTURES, DEFAULT_TAU};
use crate::search::{SearchParams, DEFAULT_SEEDS};
use crate::selection::{redistribute_overflow, select_by_quality, token_budgets, Redistribution, SelectionManifest};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub tau: f64,
    pub n_mixtures: usize,
    pub log_alpha_range: (f64, f64),
    /// Optional cap on configuration mixtures; unset by default.
    pub cap: Option<f64>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            tau: DEFAULT_TAU,
            n_mixtures: DEFAULT_CONFIG_MIXTURES,
            log_alpha_range: default_config_log_alpha(),
            cap: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    pub weighting: Weighting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub stats: StatsConfig,
    pub sampling: SamplingConfig,
    pub regression: GbtParams,
    pub search: SearchParams,
    pub search_seeds: usize,
    pub clustering: KMeansParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stats: StatsConfig::default(),
            sampling: SamplingConfig::default(),
            regression: GbtParams::default(),
            search: SearchParams::default(),
            search_seeds: DEFAULT_SEEDS,
            clustering: KMeansParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling.tau > 0.0) {
            return Err(Error::InvalidTemperature(self.sampling.tau));
        }
        self.regression.validate()?;
        self.search.validate()?;
        if self.search_seeds == 0 {
            return Err(Error::InvalidConfig("search needs at least one seed".into()));
        }
        if self.clustering.k == 0 {
            return Err(Error::InvalidConfig("k must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    pub intended: Mixture,
    pub feasible: Redistribution,
    pub budgets: Vec<u64>,
    pub manifest: SelectionManifest,
}

/// Product of the topic and format mixtures, made feasible against the
/// corpus by water-filling, apportioned into token budgets and filled with
/// the highest-scoring documents of every topic × format cell.
pub fn compose_quality_mixture(
    index: &CorpusIndex,
    topic_mix: &Mixture,
    format_mix: &Mixture,
    score: &str,
    budget: u64,
) -> Result<Composition> {
    let intended = product_mixture(topic_mix, format_mix);
    let tax: Arc<_> = intended.taxonomy().clone();
    let availability: Vec<u64> = index.counts(&tax)?.iter().map(|c| c.tokens).collect();
    let feasible = redistribute_overflow(&intended, &availability, budget)?;
    let budgets = token_budgets(&feasible.mixture, budget);
    let manifest = select_by_quality(index, &tax, &budgets, score)?;
    Ok(Composition {
        intended,
        feasible,
        budgets,
        manifest,
    })
}
