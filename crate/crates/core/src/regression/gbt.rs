//! Least-squares gradient boosting over exact-greedy regression trees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_trees: 500,
            max_depth: 4,
            learning_rate: 0.05,
            min_samples_leaf: 5,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig(
                "n_trees and min_samples_leaf must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Nodes in preorder; node 0 is the root. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    fn check(&self, n_features: usize) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::InvalidConfig("empty tree".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { value } if !value.is_finite() => {
                    return Err(Error::InvalidConfig(format!("non-finite leaf {i}")))
                }
                // Children strictly after the parent rules out cycles.
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } if feature >= n_features
                    || !threshold.is_finite()
                    || left <= i
                    || right <= i
                    || left >= n
                    || right >= n =>
                {
                    return Err(Error::InvalidConfig(format!("malformed split node {i}")));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtRegressor {
    pub n_features: usize,
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl GbtRegressor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut out = self.base_score;
        for t in &self.trees {
            out += self.learning_rate * t.predict(x);
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        if !self.base_score.is_finite() || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig("non-finite model constants".into()));
        }
        self.trees.iter().try_for_each(|t| t.check(self.n_features))
    }

    /// Fits `rows -> targets`. Deterministic for a fixed row order.
    pub fn fit(rows: &[Vec<f64>], targets: &[f64], params: &GbtParams) -> Result<Self> {
        params.validate()?;
        if rows.len() != targets.len() {
            return Err(Error::LengthMismatch(rows.len(), targets.len()));
        }
        if rows.len() < 2 {
            return Err(Error::InsufficientData(format!("{} training rows", rows.len())));
        }
        let n_features = rows[0].len();
        if rows.iter().any(|r| r.len() != n_features) {
            return Err(Error::InvalidConfig("ragged feature rows".into()));
        }
        if targets.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidConfig("non-finite target".into()));
        }

        // Mean written as an offset from the first target so that constant
        // targets reproduce exactly.
        let y0 = targets[0];
        let base_score = y0 + targets.iter().map(|y| y - y0).sum::<f64>() / targets.len() as f64;

        let orders: Vec<Vec<usize>> = (0..n_features)
            .map(|f| {
                let mut idx: Vec<usize> = (0..rows.len()).collect();
                idx.sort_by(|&a, &b| rows[a][f].total_cmp(&rows[b][f]).then(a.cmp(&b)));
                idx
            })
            .collect();

        let mut residual: Vec<f64> = targets.iter().map(|y| y - base_score).collect();
        let mut trees = Vec::with_capacity(params.n_trees);
        let mut builder = TreeBuilder {
            rows,
            orders: &orders,
            params,
            in_node: vec![false; rows.len()],
        };
        for _ in 0..params.n_trees {
            let tree = builder.build(&residual);
            for (i, r) in residual.iter_mut().enumerate() {
                *r -= params.learning_rate * tree.predict(&rows[i]);
            }
            trees.push(tree);
        }
        Ok(GbtRegressor {
            n_features,
            base_score,
            learning_rate: params.learning_rate,
            trees,
        })
    }
}

struct TreeBuilder<'a> {
    rows: &'a [Vec<f64>],
    orders: &'a [Vec<usize>],
    params: &'a GbtParams,
    in_node: Vec<bool>,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl TreeBuilder<'_> {
    fn build(&mut self, residual: &[f64]) -> RegressionTree {
        let mut nodes = Vec::new();
        let all: Vec<usize> = (0..residual.len()).collect();
        self.grow(&all, residual, 0, &mut nodes);
        RegressionTree { nodes }
    }

    fn grow(&mut self, samples: &[usize], residual: &[f64], depth: usize, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        let mean = samples.iter().map(|&i| residual[i]).sum::<f64>() / samples.len() as f64;
        nodes.push(Node::Leaf { value: mean });
        if depth >= self.params.max_depth || samples.len() < 2 * self.params.min_samples_leaf {
            return id;
        }
        let Some(split) = self.best_split(samples, residual) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| self.rows[i][split.feature] <= split.threshold);
        let l = self.grow(&left, residual, depth + 1, nodes);
        let r = self.grow(&right, residual, depth + 1, nodes);
        nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        id
    }

    fn best_split(&mut self, samples: &[usize], residual: &[f64]) -> Option<SplitChoice> {
        let n = samples.len();
        let min_leaf = self.params.min_samples_leaf;
        let total: f64 = samples.iter().map(|&i| residual[i]).sum();
        let parent = total * total / n as f64;
        for &i in samples {
            self.in_node[i] = true;
        }
        let mut best: Option<SplitChoice> = None;
        let mut sorted = Vec::with_capacity(n);
        for (f, order) in self.orders.iter().enumerate() {
            sorted.clear();
            sorted.extend(order.iter().copied().filter(|&i| self.in_node[i]));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += residual[sorted[k]];
                let n_left = k + 1;
                let n_right = n - n_left;
                if n_left < min_leaf {
                    continue;
                }
                if n_right < min_leaf {
                    break;
                }
                let lo = self.rows[sorted[k]][f];
                let hi = self.rows[sorted[k + 1]][f];
                if lo >= hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64 - parent;
                if gain > 1e-15 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(SplitChoice {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        for &i in samples {
            self.in_node[i] = false;
        }
        best
    }
}
