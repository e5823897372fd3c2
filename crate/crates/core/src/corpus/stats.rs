//! Composition statistics: proportions, joint tables, NPMI and NMI.
//!
//! All logarithms are natural. NPMI and NMI are ratios of logarithms and
//! therefore do not depend on the base.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::index::{Axis, CorpusIndex, DomainCount, DomainKey, Weighting};
use crate::error::{Error, Result};
use crate::mixture::Mixture;
use crate::taxonomy::Taxonomy;

/// Empirical joint distribution over `rows x cols`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    rows: Arc<Taxonomy>,
    cols: Arc<Taxonomy>,
    p: Vec<f64>,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
}

impl JointDistribution {
    /// Normalizes integer counts. Marginals are computed from the integer
    /// row and column sums, so they match per-taxonomy proportions exactly.
    pub fn from_counts(rows: Arc<Taxonomy>, cols: Arc<Taxonomy>, counts: &[u64]) -> Result<Self> {
        let (nr, nc) = (rows.arity(), cols.arity());
        if counts.len() != nr * nc {
            return Err(Error::LengthMismatch(counts.len(), nr * nc));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyCorpus);
        }
        let t = total as f64;
        let mut row_sum = vec![0u64; nr];
        let mut col_sum = vec![0u64; nc];
        for i in 0..nr {
            for j in 0..nc {
                row_sum[i] += counts[i * nc + j];
                col_sum[j] += counts[i * nc + j];
            }
        }
        Ok(JointDistribution {
            rows,
            cols,
            p: counts.iter().map(|&c| c as f64 / t).collect(),
            row_marginal: row_sum.into_iter().map(|c| c as f64 / t).collect(),
            col_marginal: col_sum.into_iter().map(|c| c as f64 / t).collect(),
        })
    }

    /// Normalizes arbitrary nonnegative mass.
    pub fn from_mass(rows: Arc<Taxonomy>, cols: Arc<Taxonomy>, mass: &[f64]) -> Result<Self> {
        let (nr, nc) = (rows.arity(), cols.arity());
        if mass.len() != nr * nc {
            return Err(Error::LengthMismatch(mass.len(), nr * nc));
        }
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidMixture(
                "joint mass must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyCorpus);
        }
        let p: Vec<f64> = mass.iter().map(|m| m / total).collect();
        let mut row_marginal = vec![0.0; nr];
        let mut col_marginal = vec![0.0; nc];
        for i in 0..nr {
            for j in 0..nc {
                row_marginal[i] += p[i * nc + j];
                col_marginal[j] += p[i * nc + j];
            }
        }
        Ok(JointDistribution {
            rows,
            cols,
            p,
            row_marginal,
            col_marginal,
        })
    }

    pub fn rows(&self) -> &Arc<Taxonomy> {
        &self.rows
    }

    pub fn cols(&self) -> &Arc<Taxonomy> {
        &self.cols
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.p[a * self.cols.arity() + b]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// NPMI matrix, row-major. Cells never observed get -1.
pub fn npmi(joint: &JointDistribution) -> Vec<Vec<f64>> {
    let nc = joint.cols.arity();
    (0..joint.rows.arity())
        .map(|a| {
            (0..nc)
                .map(|b| {
                    let pab = joint.get(a, b);
                    if pab <= 0.0 {
                        return -1.0;
                    }
                    let denom = -pab.ln();
                    if denom <= 0.0 {
                        // p(a,b) = 1: the two labels always co-occur.
                        return 1.0;
                    }
                    let pmi = (pab / (joint.row_marginal[a] * joint.col_marginal[b])).ln();
                    (pmi / denom).clamp(-1.0, 1.0)
                })
                .collect()
        })
        .collect()
}

pub fn mutual_information(joint: &JointDistribution) -> f64 {
    let nc = joint.cols.arity();
    let mut mi = 0.0;
    for (idx, &pab) in joint.p.iter().enumerate() {
        if pab > 0.0 {
            let (a, b) = (idx / nc, idx % nc);
            mi += pab * (pab / (joint.row_marginal[a] * joint.col_marginal[b])).ln();
        }
    }
    mi.max(0.0)
}

/// `2 I(A;B) / (H(A) + H(B))`, in `[0, 1]`.
pub fn nmi(joint: &JointDistribution) -> Result<f64> {
    let h = entropy(&joint.row_marginal) + entropy(&joint.col_marginal);
    if h <= 0.0 {
        return Err(Error::DegenerateMarginals);
    }
    Ok((2.0 * mutual_information(joint) / h).clamp(0.0, 1.0))
}

pub fn domain_proportions(index: &CorpusIndex, tax: &Arc<Taxonomy>, weighting: Weighting) -> Result<Mixture> {
    let counts = index.counts(tax)?;
    proportions_from_counts(tax, &counts, weighting)
}

pub(crate) fn proportions_from_counts(
    tax: &Arc<Taxonomy>,
    counts: &[DomainCount],
    weighting: Weighting,
) -> Result<Mixture> {
    let total: u64 = counts.iter().map(|c| c.get(weighting)).sum();
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    let t = total as f64;
    Mixture::new(
        tax.clone(),
        counts.iter().map(|c| c.get(weighting) as f64 / t).collect(),
    )
}

pub fn joint_distribution(
    index: &CorpusIndex,
    a: &Arc<Taxonomy>,
    b: &Arc<Taxonomy>,
    weighting: Weighting,
) -> Result<JointDistribution> {
    let axis = |t: &Arc<Taxonomy>| match index.domain_key(t)? {
        DomainKey::Axis(x) => Ok(x),
        DomainKey::Pair(..) => Err(Error::InvalidConfig(
            "joint distribution axes must be plain taxonomies".into(),
        )),
    };
    let counts: Vec<u64> = index
        .pair_counts(axis(a)?, axis(b)?)?
        .iter()
        .map(|c| c.get(weighting))
        .collect();
    JointDistribution::from_counts(a.clone(), b.clone(), &counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStat {
    pub id: usize,
    pub category: String,
    pub doc_count: u64,
    pub token_count: u64,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyReport {
    pub taxonomy: String,
    pub categories: Vec<CategoryStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpmiReport {
    pub rows: String,
    pub cols: String,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterNmi {
    pub topic: Option<f64>,
    pub format: Option<f64>,
}

/// Machine-readable composition summary (the data behind a treemap plot).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionReport {
    pub weighting: Weighting,
    pub total_documents: u64,
    pub total_tokens: u64,
    pub taxonomies: Vec<TaxonomyReport>,
    pub npmi: NpmiReport,
    /// `None` when both marginals are concentrated on one category.
    pub nmi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_nmi: Option<ClusterNmi>,
}

pub fn composition_report(index: &CorpusIndex, weighting: Weighting) -> Result<CompositionReport> {
    if index.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let schema = index.schema();
    let mut axes = vec![
        (Axis::Topic, schema.topic.clone()),
        (Axis::Format, schema.format.clone()),
    ];
    if let Some(c) = &schema.cluster {
        if index.axis_counts(Axis::Cluster).is_ok() {
            axes.push((Axis::Cluster, c.clone()));
        }
    }
    let mut taxonomies = Vec::new();
    for (axis, tax) in &axes {
        let counts = index.axis_counts(*axis)?;
        let mix = proportions_from_counts(tax, counts, weighting)?;
        taxonomies.push(TaxonomyReport {
            taxonomy: tax.label().to_string(),
            categories: counts
                .iter()
                .enumerate()
                .map(|(id, c)| CategoryStat {
                    id,
                    category: tax.name(id).expect("id in range").to_string(),
                    doc_count: c.documents,
                    token_count: c.tokens,
                    proportion: mix.weights()[id],
                })
                .collect(),
        });
    }
    let joint = joint_distribution(index, &schema.topic, &schema.format, weighting)?;
    let cluster_nmi = if axes.len() == 3 {
        let c = &axes[2].1;
        Some(ClusterNmi {
            topic: defined(nmi(&joint_distribution(index, c, &schema.topic, weighting)?))?,
            format: defined(nmi(&joint_distribution(index, c, &schema.format, weighting)?))?,
        })
    } else {
        None
    };
    Ok(CompositionReport {
        weighting,
        total_documents: index.total().documents,
        total_tokens: index.total().tokens,
        taxonomies,
        npmi: NpmiReport {
            rows: schema.topic.label().to_string(),
            cols: schema.format.label().to_string(),
            matrix: npmi(&joint),
        },
        nmi: defined(nmi(&joint))?,
        cluster_nmi,
    })
}

fn defined(v: Result<f64>) -> Result<Option<f64>> {
    match v {
        Ok(x) => Ok(Some(x)),
        Err(Error::DegenerateMarginals) => Ok(None),
        Err(e) => Err(e),
    }
}
