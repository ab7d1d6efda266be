use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, DecisionTree, TreeParams};
use super::{check_xy, mix_seed, ModelSpec, Prediction};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const PARAMS: &[&str] =
    &["n_estimators", "criterion", "max_depth", "max_features", "min_samples_leaf", "bootstrap"];

#[derive(Clone, Debug, PartialEq)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub tree: TreeParams,
    /// `None` resolves to `ceil(sqrt(p))` at fit time.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl ForestParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let n_estimators = spec.usize_or("n_estimators", 100)?;
        if n_estimators < 1 {
            return Err(Error::param("n_estimators", "must be at least 1"));
        }
        let max_features = match spec.params.get("max_features") {
            Some(super::ParamValue::Str(s)) if s == "sqrt" => None,
            Some(super::ParamValue::Str(s)) if s == "all" => Some(usize::MAX),
            _ => spec.opt_usize("max_features")?,
        };
        let tree = TreeParams {
            criterion: Criterion::parse(spec.str_or("criterion", "gini")?)?,
            max_depth: spec.opt_usize("max_depth")?,
            min_samples_leaf: spec.usize_or("min_samples_leaf", 1)?,
            ..TreeParams::default()
        };
        tree.validate()?;
        Ok(Self { n_estimators, tree, max_features, bootstrap: spec.bool_or("bootstrap", true)? })
    }
}

/// Bagged CART trees with per-split random feature subsets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    n_features: usize,
}

impl RandomForest {
    /// Trees are grown in parallel; tree `t` draws from its own stream derived
    /// from `(seed, t)`, so the forest is independent of scheduling.
    pub fn fit(x: &Matrix, y: &[u8], params: &ForestParams, seed: u64) -> Result<Self> {
        check_xy(x, y)?;
        let p = x.cols();
        let m = params.max_features.unwrap_or_else(|| (p as f64).sqrt().ceil() as usize).clamp(1, p);
        let tp = TreeParams { max_features: Some(m), ..params.tree.clone() };
        let n = x.rows();
        let trees: Result<Vec<DecisionTree>> = crate::par::map_range(params.n_estimators, |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, t as u64));
            let idx: Vec<usize> =
                if params.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            DecisionTree::fit_samples(x, y, idx, &tp, Some(&mut rng))
        })
        .into_iter()
        .collect();
        Ok(Self { trees: trees?, n_features: p })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Fraction of trees voting for class 1.
    pub fn vote_fraction(&self, row: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.leaf_value(row) > 0.5).count();
        votes as f64 / self.trees.len() as f64
    }

    pub fn predict(&self, x: &Matrix) -> Vec<Prediction> {
        crate::par::map_range(x.rows(), |i| Prediction::from_probability(self.vote_fraction(x.row(i))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Family;

    fn fixture() -> (Matrix, Vec<u8>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let a = (i as f64 * 0.37).sin();
            let b = (i as f64 * 0.91).cos();
            rows.push(vec![a, b, a * b]);
            y.push(u8::from(a + 0.5 * b > 0.1));
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn degenerate_forest_equals_tree() {
        let (x, y) = fixture();
        let spec =
            ModelSpec::new(Family::Rf).with("n_estimators", 1i64).with("max_features", "all").with("bootstrap", false);
        let forest = RandomForest::fit(&x, &y, &ForestParams::from_spec(&spec).unwrap(), 7).unwrap();
        let tree = DecisionTree::fit(&x, &y, &TreeParams::default()).unwrap();
        assert_eq!(forest.trees[0], tree);
        let a: Vec<u8> = forest.predict(&x).iter().map(|p| p.label).collect();
        let b: Vec<u8> = tree.predict(&x).iter().map(|p| p.label).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = fixture();
        let p = ForestParams::from_spec(&ModelSpec::new(Family::Rf).with("n_estimators", 20i64)).unwrap();
        let a = RandomForest::fit(&x, &y, &p, 3).unwrap().predict(&x);
        let b = RandomForest::fit(&x, &y, &p, 3).unwrap().predict(&x);
        assert_eq!(a, b);
    }
}
