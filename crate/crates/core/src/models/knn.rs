use serde::{Deserialize, Serialize};

use super::{check_xy, ModelSpec, Prediction};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const PARAMS: &[&str] = &["k", "metric", "q"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Metric {
    Euclidean,
    Manhattan,
    Minkowski { q: f64 },
}

impl Metric {
    #[inline]
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::Minkowski { q } => a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(q)).sum::<f64>().powf(1.0 / q),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnnParams {
    pub k: usize,
    pub metric: Metric,
}

impl KnnParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let k = spec.usize_or("k", 5)?;
        if k < 1 {
            return Err(Error::param("k", "must be at least 1"));
        }
        let metric = match spec.str_or("metric", "euclidean")? {
            "euclidean" => Metric::Euclidean,
            "manhattan" => Metric::Manhattan,
            "minkowski" => {
                let q = spec.f64_or("q", 2.0)?;
                if !(q >= 1.0) {
                    return Err(Error::param("q", "must be at least 1"));
                }
                Metric::Minkowski { q }
            }
            other => {
                return Err(Error::param(
                    "metric",
                    format!("unknown metric {other:?} (euclidean, manhattan, minkowski)"),
                ))
            }
        };
        Ok(Self { k, metric })
    }
}

/// Majority vote among the `k` nearest training rows. Distance ties are broken
/// by training-row index; an even split of votes goes to the nearest neighbor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Knn {
    k: usize,
    metric: Metric,
    x: Matrix,
    y: Vec<u8>,
}

impl Knn {
    pub fn fit(x: &Matrix, y: &[u8], params: &KnnParams) -> Result<Self> {
        check_xy(x, y)?;
        if params.k > x.rows() {
            return Err(Error::param("k", format!("{} exceeds the {} training rows", params.k, x.rows())));
        }
        Ok(Self { k: params.k, metric: params.metric, x: x.clone(), y: y.to_vec() })
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    /// `(distance, training index)` of the k nearest rows, nearest first.
    pub fn neighbors(&self, query: &[f64]) -> Vec<(f64, usize)> {
        let mut d: Vec<(f64, usize)> =
            self.x.iter_rows().enumerate().map(|(i, r)| (self.metric.distance(query, r), i)).collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d
    }

    pub fn predict_row(&self, query: &[f64]) -> Prediction {
        let nn = self.neighbors(query);
        let votes = nn.iter().filter(|&&(_, i)| self.y[i] == 1).count();
        let label = match (2 * votes).cmp(&self.k) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => 0,
            std::cmp::Ordering::Equal => self.y[nn[0].1],
        };
        Prediction { label, score: votes as f64 / self.k as f64 }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<Prediction> {
        crate::par::map_range(x.rows(), |i| self.predict_row(x.row(i)))
    }
}
