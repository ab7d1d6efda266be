//! Exhaustive hyperparameter search.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Family, ModelSpec, ParamValue};
use crate::error::{Error, Result};
use crate::eval::{run_protocol, Protocol};
use crate::features::Dataset;

/// A union of cartesian blocks: each block maps parameter names to the levels
/// to try, and the grid is the concatenation of every block's product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub family: Family,
    pub blocks: Vec<BTreeMap<String, Vec<ParamValue>>>,
}

type Axes = BTreeMap<String, Vec<ParamValue>>;

fn axes<const N: usize>(items: [(&str, Vec<ParamValue>); N]) -> Axes {
    items.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn ints(v: &[i64]) -> Vec<ParamValue> {
    v.iter().map(|&x| ParamValue::Int(x)).collect()
}

fn floats(v: &[f64]) -> Vec<ParamValue> {
    v.iter().map(|&x| ParamValue::Float(x)).collect()
}

fn strs(v: &[&str]) -> Vec<ParamValue> {
    v.iter().map(|&x| ParamValue::from(x)).collect()
}

impl Grid {
    pub fn single(spec: &ModelSpec) -> Self {
        Self {
            family: spec.family,
            blocks: vec![spec.params.iter().map(|(k, v)| (k.clone(), vec![v.clone()])).collect()],
        }
    }

    /// Every cell, block by block; within a block the product runs over the
    /// parameter names in sorted order with the last name varying fastest.
    pub fn specs(&self) -> Vec<ModelSpec> {
        let mut out = Vec::new();
        for block in &self.blocks {
            let names: Vec<&String> = block.keys().collect();
            if block.values().any(Vec::is_empty) {
                continue;
            }
            let mut idx = vec![0usize; names.len()];
            'cells: loop {
                let mut spec = ModelSpec::new(self.family);
                for (n, &i) in names.iter().zip(&idx) {
                    spec.params.insert((*n).clone(), block[*n][i].clone());
                }
                out.push(spec);
                let mut d = names.len();
                loop {
                    if d == 0 {
                        break 'cells;
                    }
                    d -= 1;
                    idx[d] += 1;
                    if idx[d] < block[names[d]].len() {
                        break;
                    }
                    idx[d] = 0;
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.specs().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let specs = self.specs();
        if specs.is_empty() {
            return Err(Error::param("grid", format!("{} grid has no cells", self.family)));
        }
        specs.iter().try_for_each(ModelSpec::validate)
    }

    /// The levels searched in the original study.
    pub fn paper(family: Family) -> Self {
        let blocks = match family {
            Family::Rf => vec![axes([
                ("criterion", strs(&["gini", "entropy", "log_loss"])),
                ("n_estimators", ints(&[10, 50, 100, 200, 500])),
                ("max_depth", vec!["none".into(), 5.into(), 10.into(), 15.into()]),
            ])],
            Family::Knn => vec![axes([
                ("k", ints(&(1..=15).collect::<Vec<_>>())),
                ("metric", strs(&["euclidean", "manhattan", "minkowski"])),
            ])],
            Family::Gbt => vec![axes([
                ("n_estimators", ints(&[10, 50, 100, 200, 500])),
                ("max_depth", ints(&[3, 6, 8, 10])),
                ("eval_metric", strs(&["logloss", "rmse"])),
            ])],
            Family::Svm => {
                let c = floats(&[0.025, 0.1, 0.5, 1.0, 10.0, 50.0, 100.0]);
                vec![
                    axes([("kernel", strs(&["linear"])), ("c", c.clone())]),
                    axes([
                        ("kernel", strs(&["poly"])),
                        ("degree", ints(&[1, 2, 3, 4, 5])),
                        ("gamma", floats(&[0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0])),
                        ("c", c),
                    ]),
                ]
            }
            Family::Nb => vec![axes([("variant", strs(&["gaussian", "bernoulli", "complement", "multinomial"]))])],
            Family::Ann => vec![axes([
                ("activation", strs(&["relu", "tanh", "sigmoid"])),
                ("optimizer", strs(&["sgd", "adam", "nadam", "rmsprop"])),
                ("loss", strs(&["scc", "bc"])),
                ("hidden_layers", ints(&[1, 2])),
                ("hidden_units", ints(&[10, 20, 30, 40, 50])),
                ("epochs", ints(&[20, 50, 100, 200, 500])),
                ("dropout", floats(&[0.2, 0.3])),
            ])],
            Family::Lstm => vec![axes([
                ("activation", strs(&["relu", "tanh", "sigmoid"])),
                ("optimizer", strs(&["sgd", "adam", "nadam", "rmsprop"])),
                ("hidden_layers", ints(&[1, 2])),
                ("hidden_units", ints(&[10, 20, 30, 40, 50])),
                ("epochs", ints(&[20, 50, 100, 200, 500])),
                ("dropout", floats(&[0.2, 0.3])),
            ])],
        };
        Self { family, blocks }
    }

    /// A small subset of the study's levels that runs in minutes.
    pub fn quick(family: Family) -> Self {
        let blocks = match family {
            Family::Rf => vec![axes([
                ("criterion", strs(&["gini", "entropy"])),
                ("n_estimators", ints(&[50, 100])),
                ("max_depth", vec!["none".into(), 5.into(), 10.into()]),
            ])],
            Family::Knn => {
                vec![axes([("k", ints(&[1, 3, 5, 7, 9, 11, 13, 15])), ("metric", strs(&["euclidean", "manhattan"]))])]
            }
            Family::Gbt => vec![axes([("n_estimators", ints(&[50, 100])), ("max_depth", ints(&[3, 6]))])],
            Family::Svm => vec![
                axes([("kernel", strs(&["linear"])), ("c", floats(&[0.1, 1.0, 10.0]))]),
                axes([
                    ("kernel", strs(&["poly"])),
                    ("degree", ints(&[2, 3])),
                    ("gamma", floats(&[0.5, 1.0])),
                    ("c", floats(&[0.1, 1.0])),
                ]),
            ],
            Family::Nb => Self::paper(Family::Nb).blocks,
            Family::Ann => vec![axes([
                ("activation", strs(&["relu", "tanh"])),
                ("optimizer", strs(&["adam", "rmsprop"])),
                ("hidden_units", ints(&[10, 30])),
                ("epochs", ints(&[50])),
            ])],
            Family::Lstm => vec![axes([
                ("optimizer", strs(&["adam", "rmsprop"])),
                ("hidden_units", ints(&[10, 20])),
                ("epochs", ints(&[20])),
            ])],
        };
        Self { family, blocks }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridCell {
    pub spec: ModelSpec,
    pub accuracy: Option<f64>,
    pub auc: Option<f64>,
    pub unit_accuracy: Vec<f64>,
    pub train_seconds: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridResult {
    pub cells: Vec<GridCell>,
    /// Index into `cells`.
    pub best: usize,
}

impl GridResult {
    pub fn best_cell(&self) -> &GridCell {
        &self.cells[self.best]
    }
}

/// Scores every cell under `protocol` (cells run in parallel, all with
/// `seed`) and picks the highest mean accuracy, then the higher AUC, then the
/// lexicographically smallest parameters. Cells that fail are kept with their
/// error; the search fails only if every cell does.
pub fn grid_search(grid: &Grid, ds: &Dataset, protocol: &Protocol, seed: u64) -> Result<GridResult> {
    let specs = grid.specs();
    if specs.is_empty() {
        return Err(Error::param("grid", format!("{} grid has no cells", grid.family)));
    }
    protocol.check_feasible(ds.len())?;
    let cells: Vec<GridCell> = crate::par::map_slice(&specs, |spec| {
        match spec.validate().and_then(|_| run_protocol(spec, ds, protocol, seed)) {
            Ok(r) => GridCell {
                spec: spec.clone(),
                accuracy: Some(r.mean_accuracy),
                auc: r.pooled.auc,
                unit_accuracy: r.unit_accuracy,
                train_seconds: r.train_seconds,
                error: None,
            },
            Err(e) => GridCell {
                spec: spec.clone(),
                accuracy: None,
                auc: None,
                unit_accuracy: Vec::new(),
                train_seconds: 0.0,
                error: Some(e.to_string()),
            },
        }
    });
    let mut best: Option<usize> = None;
    for (i, c) in cells.iter().enumerate() {
        let Some(acc) = c.accuracy else { continue };
        let better = match best {
            None => true,
            Some(b) => {
                let bc = &cells[b];
                let ba = bc.accuracy.unwrap();
                let auc = c.auc.unwrap_or(f64::NEG_INFINITY);
                let bauc = bc.auc.unwrap_or(f64::NEG_INFINITY);
                acc > ba || (acc == ba && (auc > bauc || (auc == bauc && c.spec.params_cmp(&bc.spec).is_lt())))
            }
        };
        if better {
            best = Some(i);
        }
    }
    match best {
        Some(best) => Ok(GridResult { cells, best }),
        None => Err(Error::InvalidData(format!(
            "every {} grid cell failed; first error: {}",
            grid.family,
            cells[0].error.as_deref().unwrap_or("unknown")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_sizes() {
        assert_eq!(Grid::paper(Family::Rf).len(), 60);
        assert_eq!(Grid::paper(Family::Knn).len(), 45);
        assert_eq!(Grid::paper(Family::Svm).len(), 7 + 5 * 7 * 7);
        assert_eq!(Grid::paper(Family::Nb).len(), 4);
        let single = Grid::single(&ModelSpec::new(Family::Knn));
        assert_eq!(single.specs(), vec![ModelSpec::new(Family::Knn)]);
    }

    #[test]
    fn every_level_validates() {
        for f in Family::ALL {
            Grid::paper(f).validate().unwrap();
            Grid::quick(f).validate().unwrap();
        }
    }
}
