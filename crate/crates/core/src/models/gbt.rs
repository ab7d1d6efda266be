//! Second-order gradient boosted trees on the logistic loss.
//!
//! Each round fits a regression tree to the per-row gradients `g = p - y` and
//! hessians `h = p(1 - p)` of the current margin. A leaf holding gradient sum
//! `G` and hessian sum `H` gets weight `-G / (H + lambda)`; a split is kept only
//! when its regularized gain is positive.

use serde::{Deserialize, Serialize};

use super::{check_xy, ModelSpec, Prediction};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const PARAMS: &[&str] =
    &["n_estimators", "max_depth", "learning_rate", "lambda", "gamma", "min_child_weight", "eval_metric"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMetric {
    Logloss,
    Rmse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub eval_metric: EvalMetric,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            max_depth: 6,
            learning_rate: 0.3,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            eval_metric: EvalMetric::Logloss,
        }
    }
}

impl GbtParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let d = Self::default();
        let p = Self {
            n_rounds: spec.usize_or("n_estimators", d.n_rounds)?,
            max_depth: spec.usize_or("max_depth", d.max_depth)?,
            learning_rate: spec.f64_or("learning_rate", d.learning_rate)?,
            lambda: spec.f64_or("lambda", d.lambda)?,
            gamma: spec.f64_or("gamma", d.gamma)?,
            min_child_weight: spec.f64_or("min_child_weight", d.min_child_weight)?,
            eval_metric: match spec.str_or("eval_metric", "logloss")? {
                "logloss" => EvalMetric::Logloss,
                "rmse" => EvalMetric::Rmse,
                other => return Err(Error::param("eval_metric", format!("unknown metric {other:?} (logloss, rmse)"))),
            },
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rounds < 1 {
            return Err(Error::param("n_estimators", "must be at least 1"));
        }
        if self.max_depth < 1 {
            return Err(Error::param("max_depth", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::param("learning_rate", "must be positive"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::param("lambda", "must be non-negative"));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::param("gamma", "must be non-negative"));
        }
        if !(self.min_child_weight >= 0.0) {
            return Err(Error::param("min_child_weight", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GbtNode {
    /// `value` already includes the learning rate.
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtTree {
    pub nodes: Vec<GbtNode>,
}

impl GbtTree {
    pub fn value(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                GbtNode::Leaf { value } => return *value,
                GbtNode::Split { feature, threshold, left, right, .. } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// Structure score `G^2 / (H + lambda)` of a node.
fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 {
        g * g / d
    } else {
        0.0
    }
}

/// Optimal leaf weight for gradient/hessian sums.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 {
        -g / d
    } else {
        0.0
    }
}

/// Regularized gain of splitting `(G, H)` into left and right parts.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - score(gl + gr, hl + hr, lambda)) - gamma
}

struct Grower<'a> {
    x: &'a Matrix,
    g: &'a [f64],
    h: &'a [f64],
    p: &'a GbtParams,
    nodes: Vec<GbtNode>,
}

impl Grower<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let slot = self.nodes.len();
        let gs: f64 = idx.iter().map(|&i| self.g[i]).sum();
        let hs: f64 = idx.iter().map(|&i| self.h[i]).sum();
        let leaf = GbtNode::Leaf { value: self.p.learning_rate * leaf_weight(gs, hs, self.p.lambda) };
        self.nodes.push(leaf.clone());
        if depth >= self.p.max_depth || idx.len() < 2 {
            return slot;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = idx.clone();
        for f in 0..self.x.cols() {
            order.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                gl += self.g[order[k]];
                hl += self.h[order[k]];
                let (a, b) = (self.x.get(order[k], f), self.x.get(order[k + 1], f));
                if a == b {
                    continue;
                }
                let hr = hs - hl;
                if hl < self.p.min_child_weight || hr < self.p.min_child_weight {
                    continue;
                }
                let gain = split_gain(gl, hl, gs - gl, hr, self.p.lambda, self.p.gamma);
                if gain > 0.0 && best.is_none_or(|(_, _, bg)| gain > bg) {
                    let mut t = a + (b - a) / 2.0;
                    if t >= b {
                        t = a;
                    }
                    best = Some((f, t, gain));
                }
            }
        }
        let Some((feature, threshold, gain)) = best else {
            return slot;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x.get(i, feature) <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = GbtNode::Split { feature, threshold, gain, left, right };
        slot
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Gbt {
    /// Initial margin: log-odds of the training class-1 frequency.
    pub base_margin: f64,
    pub trees: Vec<GbtTree>,
    pub eval_metric: EvalMetric,
    /// Training metric after each round.
    pub train_curve: Vec<f64>,
    n_features: usize,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn metric(kind: EvalMetric, p: &[f64], y: &[u8]) -> f64 {
    let n = y.len() as f64;
    match kind {
        EvalMetric::Logloss => {
            p.iter()
                .zip(y)
                .map(|(&q, &t)| {
                    let q = q.clamp(1e-15, 1.0 - 1e-15);
                    if t == 1 {
                        -q.ln()
                    } else {
                        -(1.0 - q).ln()
                    }
                })
                .sum::<f64>()
                / n
        }
        EvalMetric::Rmse => (p.iter().zip(y).map(|(&q, &t)| (q - t as f64).powi(2)).sum::<f64>() / n).sqrt(),
    }
}

impl Gbt {
    pub fn fit(x: &Matrix, y: &[u8], params: &GbtParams) -> Result<Self> {
        check_xy(x, y)?;
        params.validate()?;
        let n = y.len();
        let pos = y.iter().filter(|&&v| v == 1).count() as f64;
        let rate = (pos / n as f64).clamp(1e-6, 1.0 - 1e-6);
        let base_margin = (rate / (1.0 - rate)).ln();
        let mut margin = vec![base_margin; n];
        let mut trees = Vec::with_capacity(params.n_rounds);
        let mut train_curve = Vec::with_capacity(params.n_rounds);
        let (mut g, mut h) = (vec![0.0; n], vec![0.0; n]);
        for _ in 0..params.n_rounds {
            for i in 0..n {
                let p = sigmoid(margin[i]);
                g[i] = p - y[i] as f64;
                h[i] = p * (1.0 - p);
            }
            let mut grower = Grower { x, g: &g, h: &h, p: params, nodes: Vec::new() };
            grower.grow((0..n).collect(), 0);
            let tree = GbtTree { nodes: grower.nodes };
            for (i, m) in margin.iter_mut().enumerate() {
                *m += tree.value(x.row(i));
            }
            let probs: Vec<f64> = margin.iter().map(|&m| sigmoid(m)).collect();
            train_curve.push(metric(params.eval_metric, &probs, y));
            trees.push(tree);
        }
        Ok(Self { base_margin, trees, eval_metric: params.eval_metric, train_curve, n_features: x.cols() })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_margin + self.trees.iter().map(|t| t.value(row)).sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<Prediction> {
        crate::par::map_range(x.rows(), |i| Prediction::from_probability(sigmoid(self.margin(x.row(i)))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_single_leaf_has_zero_weight() {
        let x = Matrix::from_rows(&[[1.0], [1.0], [1.0], [1.0]]).unwrap();
        let p = GbtParams { n_rounds: 1, lambda: 0.0, ..Default::default() };
        let m = Gbt::fit(&x, &[0, 1, 0, 1], &p).unwrap();
        assert_eq!(m.base_margin, 0.0);
        assert_eq!(m.trees[0].nodes, vec![GbtNode::Leaf { value: 0.0 }]);
    }

    #[test]
    fn huge_gamma_blocks_splits() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let p = GbtParams { gamma: 1e6, n_rounds: 5, ..Default::default() };
        let m = Gbt::fit(&x, &[0, 0, 1, 1], &p).unwrap();
        assert!(m.trees.iter().all(|t| t.nodes.len() == 1));
        let preds = m.predict(&x);
        assert!(preds.windows(2).all(|w| w[0].score == w[1].score));
    }
}
