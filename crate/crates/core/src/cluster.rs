//! k-means over precomputed document embeddings.
//!
//! Binary embedding files are little-endian: `n: u64`, `d: u64`, then `n * d`
//! `f32` values row by row. Ids live in a sidecar text file, one per line.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{nmi, JointDistribution};
use crate::error::{Error, Result};
use crate::rng;
use crate::taxonomy::Taxonomy;

pub const DEFAULT_K: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingSet {
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidEmbeddings("dimension must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::InvalidEmbeddings(format!(
                "{} values for {} ids of dimension {dim}",
                data.len(),
                ids.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidEmbeddings(format!(
                "non-finite entry in vector {}",
                i / dim
            )));
        }
        Ok(EmbeddingSet { ids, dim, data })
    }

    pub fn from_rows(ids: Vec<String>, rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.len(),
            });
        }
        Self::new(ids, dim, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        for x in &self.data {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn write_ids<W: Write>(&self, mut w: W) -> Result<()> {
        for id in &self.ids {
            writeln!(w, "{id}")?;
        }
        Ok(())
    }

    /// Reads the binary matrix and pairs it with `ids`.
    pub fn read_binary<R: Read>(mut r: R, ids: Vec<String>) -> Result<Self> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let dim = u64::from_le_bytes(word) as usize;
        if n != ids.len() {
            return Err(Error::InvalidEmbeddings(format!("{n} vectors but {} ids", ids.len())));
        }
        let bytes = n
            .checked_mul(dim)
            .and_then(|v| v.checked_mul(4))
            .ok_or_else(|| Error::InvalidEmbeddings("header size overflows".into()))?;
        let mut raw = Vec::with_capacity(bytes);
        r.take(bytes as u64).read_to_end(&mut raw)?;
        if raw.len() != bytes {
            return Err(Error::InvalidEmbeddings(format!(
                "expected {bytes} bytes of vector data, found {}",
                raw.len()
            )));
        }
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(ids, dim, data)
    }
}

/// Parses an id sidecar, one non-empty id per line.
pub fn parse_ids(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub normalize: bool,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            k: DEFAULT_K,
            max_iters: 100,
            tol: 1e-6,
            seed: 0,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub dim: usize,
    pub normalized: bool,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub model: ClusterModel,
    pub assignments: Vec<usize>,
}

fn prepare(v: &[f32], normalize: bool) -> Vec<f64> {
    let mut x: Vec<f64> = v.iter().map(|&a| a as f64).collect();
    if normalize {
        let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 0.0 {
            x.iter_mut().for_each(|a| *a /= norm);
        }
    }
    x
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid and its squared distance; ties to the lowest id.
fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut rng::StreamRng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            // Guard against rounding landing on a zero-weight tail.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign_all(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    points.par_iter().map(|p| nearest(centroids, p)).unzip()
}

/// Lloyd iterations from a k-means++ start. Centroid sums run in point
/// order, so results do not depend on the thread count.
pub fn kmeans(embeds: &EmbeddingSet, params: &KMeansParams) -> Result<KMeansResult> {
    let n = embeds.len();
    let k = params.k;
    if k == 0 || n < k {
        return Err(Error::TooFewPoints { points: n, k });
    }
    if !(params.tol >= 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance {} must be >= 0", params.tol)));
    }
    let points: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| prepare(embeds.vector(i), params.normalize))
        .collect();
    let mut rng = rng::stream(params.seed, rng::purpose::KMEANS, 0, 0);
    let mut centroids = plus_plus_init(&points, k, &mut rng);
    let dim = embeds.dim();

    let mut history = Vec::new();
    let mut iterations = 0;
    let (mut labels, mut dists) = assign_all(&points, &centroids);
    history.push(dists.iter().sum::<f64>());
    while iterations < params.max_iters {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&labels) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut next: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .zip(&centroids)
            .map(|((s, &m), old)| {
                if m == 0 {
                    old.clone()
                } else {
                    s.into_iter().map(|v| v / m as f64).collect()
                }
            })
            .collect();
        // Empty clusters take the point farthest from its own centroid.
        let mut taken = vec![false; n];
        for j in (0..k).filter(|&j| counts[j] == 0) {
            let far = (0..n)
                .filter(|&i| !taken[i])
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dists[b] >= dists[i] => Some(b),
                    _ => Some(i),
                });
            if let Some(i) = far {
                taken[i] = true;
                next[j] = points[i].clone();
            }
        }
        let shift = next
            .iter()
            .zip(&centroids)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        (labels, dists) = assign_all(&points, &centroids);
        history.push(dists.iter().sum::<f64>());
        if shift < params.tol {
            break;
        }
    }
    let inertia = *history.last().expect("at least one assignment");
    Ok(KMeansResult {
        model: ClusterModel {
            k,
            dim,
            normalized: params.normalize,
            centroids,
            iterations,
            inertia,
            inertia_history: history,
        },
        assignments: labels,
    })
}

impl ClusterModel {
    /// Nearest centroid by squared Euclidean distance, ties to the lowest id.
    pub fn assign(&self, v: &[f32]) -> Result<usize> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(nearest(&self.centroids, &prepare(v, self.normalized)).0)
    }

    pub fn check(&self) -> Result<()> {
        if self.k == 0 || self.centroids.len() != self.k {
            return Err(Error::InvalidConfig("cluster model needs k >= 1 centroids".into()));
        }
        if self
            .centroids
            .iter()
            .any(|c| c.len() != self.dim || c.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::InvalidConfig("malformed centroid".into()));
        }
        Ok(())
    }
}

pub fn assign(model: &ClusterModel, v: &[f32]) -> Result<usize> {
    model.assign(v)
}

/// NMI between cluster ids and category labels. `weights` gives per-document
/// token counts; `None` weights every document equally.
pub fn cluster_taxonomy_nmi(
    assignments: &[usize],
    k: usize,
    labels: &[usize],
    label_taxonomy: &Arc<Taxonomy>,
    weights: Option<&[u64]>,
) -> Result<f64> {
    if assignments.len() != labels.len() {
        return Err(Error::LengthMismatch(assignments.len(), labels.len()));
    }
    if let Some(w) = weights {
        if w.len() != labels.len() {
            return Err(Error::LengthMismatch(w.len(), labels.len()));
        }
    }
    let clusters = Arc::new(Taxonomy::clusters(k)?);
    let m = label_taxonomy.arity();
    let mut counts = vec![0u64; k * m];
    for (i, (&c, &l)) in assignments.iter().zip(labels).enumerate() {
        clusters.check_id(c)?;
        label_taxonomy.check_id(l)?;
        counts[c * m + l] += weights.map_or(1, |w| w[i]);
    }
    let joint = JointDistribution::from_counts(clusters, label_taxonomy.clone(), &counts)?;
    nmi(&joint)
}
