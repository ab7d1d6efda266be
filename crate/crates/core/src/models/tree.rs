//! CART classification tree with axis-aligned midpoint thresholds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::check_xy;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    /// Shannon entropy in bits.
    Entropy,
    /// Mean binary log loss of predicting the node's class-1 fraction (nats).
    LogLoss,
}

impl Criterion {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            "log_loss" | "logloss" => Ok(Criterion::LogLoss),
            other => Err(Error::param("criterion", format!("unknown criterion {other:?} (gini, entropy, log_loss)"))),
        }
    }

    /// Node impurity for `pos` positives among `n` samples.
    pub fn impurity(&self, pos: f64, n: f64) -> f64 {
        if n <= 0.0 {
            return 0.0;
        }
        let p = pos / n;
        let q = 1.0 - p;
        let xlogx = |v: f64, log: fn(f64) -> f64| if v > 0.0 { v * log(v) } else { 0.0 };
        match self {
            Criterion::Gini => 1.0 - p * p - q * q,
            Criterion::Entropy => -(xlogx(p, f64::log2) + xlogx(q, f64::log2)),
            Criterion::LogLoss => -(xlogx(p, f64::ln) + xlogx(q, f64::ln)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeParams {
    pub criterion: Criterion,
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            criterion: Criterion::Gini,
            max_depth: None,
            min_samples_leaf: 1,
            min_samples_split: 2,
            max_features: None,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == Some(0) {
            return Err(Error::param("max_depth", "must be at least 1"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::param("min_samples_leaf", "must be at least 1"));
        }
        if self.max_features == Some(0) {
            return Err(Error::param("max_features", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Class-1 fraction of the training samples reaching the leaf.
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
}

/// Best split found for one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Scans midpoints between distinct sorted values of each feature in
/// `features` (ascending) and returns the largest impurity decrease.
/// Earlier features and lower thresholds win exact ties.
pub fn best_split(
    x: &Matrix,
    y: &[u8],
    idx: &[usize],
    features: &[usize],
    criterion: Criterion,
    min_leaf: usize,
) -> Option<SplitCandidate> {
    let n = idx.len() as f64;
    let pos: f64 = idx.iter().map(|&i| y[i] as f64).sum();
    let parent = criterion.impurity(pos, n);
    let mut best: Option<SplitCandidate> = None;
    let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(idx.len());
    for &f in features {
        pairs.clear();
        pairs.extend(idx.iter().map(|&i| (x.get(i, f), y[i])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_pos = 0.0;
        for k in 0..pairs.len() - 1 {
            left_pos += pairs[k].1 as f64;
            let nl = k + 1;
            if pairs[k].0 == pairs[k + 1].0 || nl < min_leaf || pairs.len() - nl < min_leaf {
                continue;
            }
            let (nlf, nrf) = (nl as f64, n - nl as f64);
            let child = (nlf * criterion.impurity(left_pos, nlf) + nrf * criterion.impurity(pos - left_pos, nrf)) / n;
            let gain = parent - child;
            if gain > 1e-12 && best.is_none_or(|b| gain > b.gain) {
                let (a, b) = (pairs[k].0, pairs[k + 1].0);
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some(SplitCandidate { feature: f, threshold, gain });
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    n_features: usize,
}

impl DecisionTree {
    pub fn fit(x: &Matrix, y: &[u8], params: &TreeParams) -> Result<Self> {
        check_xy(x, y)?;
        let idx: Vec<usize> = (0..x.rows()).collect();
        Self::fit_samples::<rand_chacha::ChaCha8Rng>(x, y, idx, params, None)
    }

    /// Fits on a sample multiset (bootstrap draws may repeat rows). When
    /// `rng` is given and `max_features` is below the feature count, each
    /// split examines a fresh random subset.
    pub fn fit_samples<R: Rng>(
        x: &Matrix,
        y: &[u8],
        idx: Vec<usize>,
        params: &TreeParams,
        mut rng: Option<&mut R>,
    ) -> Result<Self> {
        params.validate()?;
        let p = x.cols();
        let mut tree = DecisionTree { nodes: Vec::new(), n_features: p };
        let all: Vec<usize> = (0..p).collect();
        // Stack of (node slot, samples, depth).
        let mut stack = vec![(0usize, idx, 0usize)];
        tree.nodes.push(Node::Leaf { value: 0.0, samples: 0 });
        while let Some((slot, samples, depth)) = stack.pop() {
            let pos = samples.iter().filter(|&&i| y[i] == 1).count();
            let leaf = Node::Leaf { value: pos as f64 / samples.len() as f64, samples: samples.len() };
            let can_split = samples.len() >= params.min_samples_split.max(2)
                && pos != 0
                && pos != samples.len()
                && params.max_depth.is_none_or(|d| depth < d);
            if !can_split {
                tree.nodes[slot] = leaf;
                continue;
            }
            let features = match (params.max_features, rng.as_deref_mut()) {
                (Some(m), Some(r)) if m < p => {
                    let mut f = rand::seq::index::sample(r, p, m).into_vec();
                    f.sort_unstable();
                    f
                }
                _ => all.clone(),
            };
            let Some(split) = best_split(x, y, &samples, &features, params.criterion, params.min_samples_leaf) else {
                tree.nodes[slot] = leaf;
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) =
                samples.iter().partition(|&&i| x.get(i, split.feature) <= split.threshold);
            let left = tree.nodes.len();
            tree.nodes.push(Node::Leaf { value: 0.0, samples: 0 });
            let right = tree.nodes.len();
            tree.nodes.push(Node::Leaf { value: 0.0, samples: 0 });
            tree.nodes[slot] =
                Node::Split { feature: split.feature, threshold: split.threshold, gain: split.gain, left, right };
            stack.push((right, r, depth + 1));
            stack.push((left, l, depth + 1));
        }
        Ok(tree)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Class-1 fraction of the leaf the row falls into.
    pub fn leaf_value(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value, .. } => return *value,
                Node::Split { feature, threshold, left, right, .. } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn predict(&self, x: &Matrix) -> Vec<super::Prediction> {
        x.iter_rows().map(|r| super::Prediction::from_probability(self.leaf_value(r))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impurity_values() {
        for c in [Criterion::Gini, Criterion::Entropy, Criterion::LogLoss] {
            assert_eq!(c.impurity(4.0, 4.0), 0.0);
            assert_eq!(c.impurity(0.0, 4.0), 0.0);
        }
        assert!((Criterion::Gini.impurity(2.0, 4.0) - 0.5).abs() < 1e-15);
        assert!((Criterion::Entropy.impurity(2.0, 4.0) - 1.0).abs() < 1e-15);
        assert!((Criterion::LogLoss.impurity(2.0, 4.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn threshold_data_one_split() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [10.0], [11.0], [12.0]]).unwrap();
        let y = [0, 0, 0, 1, 1, 1];
        let t = DecisionTree::fit(&x, &y, &TreeParams::default()).unwrap();
        assert_eq!(t.depth(), 1);
        match t.nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(threshold, 6.5),
            _ => panic!("expected a split"),
        }
        assert!(t.predict(&x).iter().zip(&y).all(|(p, &l)| p.label == l));
    }

    #[test]
    fn zero_depth_rejected() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let p = TreeParams { max_depth: Some(0), ..Default::default() };
        assert!(DecisionTree::fit(&x, &[0, 1], &p).is_err());
    }
}
