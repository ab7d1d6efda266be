use serde::{Deserialize, Serialize};

use super::{check_xy, ModelSpec, Prediction};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const PARAMS: &[&str] = &["variant", "alpha", "var_smoothing", "binarize", "norm"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NbVariant {
    Gaussian,
    Multinomial,
    Bernoulli,
    Complement,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NbParams {
    pub variant: NbVariant,
    /// Additive (Laplace/Lidstone) smoothing for the count-based variants.
    pub alpha: f64,
    /// Added to every Gaussian variance, as a fraction of the largest feature variance.
    pub var_smoothing: f64,
    /// Bernoulli threshold: values above it count as 1.
    pub binarize: f64,
    /// Complement weights normalized by their absolute row sum.
    pub norm: bool,
}

impl Default for NbParams {
    fn default() -> Self {
        Self { variant: NbVariant::Gaussian, alpha: 1.0, var_smoothing: 1e-9, binarize: 0.5, norm: true }
    }
}

impl NbParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let d = NbParams::default();
        let variant = match spec.str_or("variant", "gaussian")? {
            "gaussian" => NbVariant::Gaussian,
            "multinomial" => NbVariant::Multinomial,
            "bernoulli" => NbVariant::Bernoulli,
            "complement" => NbVariant::Complement,
            other => {
                return Err(Error::param(
                    "variant",
                    format!("unknown variant {other:?} (gaussian, multinomial, bernoulli, complement)"),
                ))
            }
        };
        let alpha = spec.f64_or("alpha", d.alpha)?;
        if !(alpha >= 0.0) {
            return Err(Error::param("alpha", "must be non-negative"));
        }
        let var_smoothing = spec.f64_or("var_smoothing", d.var_smoothing)?;
        if !(var_smoothing >= 0.0) {
            return Err(Error::param("var_smoothing", "must be non-negative"));
        }
        Ok(Self {
            variant,
            alpha,
            var_smoothing,
            binarize: spec.f64_or("binarize", d.binarize)?,
            norm: spec.bool_or("norm", d.norm)?,
        })
    }
}

/// Per-class likelihood parameters, indexed `[class][feature]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Likelihood {
    Gaussian {
        mean: [Vec<f64>; 2],
        var: [Vec<f64>; 2],
    },
    Multinomial {
        log_theta: [Vec<f64>; 2],
    },
    Bernoulli {
        log_p: [Vec<f64>; 2],
        log_q: [Vec<f64>; 2],
        threshold: f64,
    },
    /// Joint log-likelihood is `sum_i x_i * weight[c][i]` with no prior term.
    Complement {
        weight: [Vec<f64>; 2],
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NaiveBayes {
    pub log_prior: [f64; 2],
    pub likelihood: Likelihood,
    n_features: usize,
}

impl NaiveBayes {
    pub fn fit(x: &Matrix, y: &[u8], params: &NbParams) -> Result<Self> {
        check_xy(x, y)?;
        let p = x.cols();
        let count = [y.iter().filter(|&&v| v == 0).count(), y.iter().filter(|&&v| v == 1).count()];
        if let Some(c) = count.iter().position(|&c| c == 0) {
            return Err(Error::InvalidData(format!("class {c} absent from training labels")));
        }
        let n = y.len() as f64;
        let log_prior = [(count[0] as f64 / n).ln(), (count[1] as f64 / n).ln()];

        let needs_counts = matches!(params.variant, NbVariant::Multinomial | NbVariant::Complement);
        if needs_counts && x.as_slice().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidData("multinomial and complement naive Bayes need non-negative features".into()));
        }

        let class_sums = |f: &dyn Fn(f64) -> f64| -> [Vec<f64>; 2] {
            let mut s = [vec![0.0; p], vec![0.0; p]];
            for (row, &c) in x.iter_rows().zip(y) {
                for (acc, &v) in s[c as usize].iter_mut().zip(row) {
                    *acc += f(v);
                }
            }
            s
        };

        let likelihood = match params.variant {
            NbVariant::Gaussian => {
                let sums = class_sums(&|v| v);
                let mean: [Vec<f64>; 2] =
                    [0, 1].map(|c| sums[c].iter().map(|s| s / count[c] as f64).collect::<Vec<_>>());
                let mut var = [vec![0.0; p], vec![0.0; p]];
                for (row, &c) in x.iter_rows().zip(y) {
                    let c = c as usize;
                    for j in 0..p {
                        let d = row[j] - mean[c][j];
                        var[c][j] += d * d;
                    }
                }
                for c in 0..2 {
                    for v in &mut var[c] {
                        *v /= count[c] as f64;
                    }
                }
                // Smoothing scales with the largest variance of the pooled data.
                let overall = (0..p)
                    .map(|j| {
                        let col = x.column(j);
                        let m = col.iter().sum::<f64>() / n;
                        col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
                    })
                    .fold(0.0, f64::max);
                let eps = (params.var_smoothing * overall).max(1e-300);
                for vc in &mut var {
                    for v in vc.iter_mut() {
                        *v += eps;
                    }
                }
                Likelihood::Gaussian { mean, var }
            }
            NbVariant::Multinomial => {
                let sums = class_sums(&|v| v);
                let a = params.alpha;
                let log_theta = [0, 1].map(|c| {
                    let total: f64 = sums[c].iter().sum();
                    sums[c].iter().map(|&nyi| ((nyi + a) / (total + a * p as f64)).ln()).collect::<Vec<_>>()
                });
                Likelihood::Multinomial { log_theta }
            }
            NbVariant::Bernoulli => {
                let t = params.binarize;
                let sums = class_sums(&|v| if v > t { 1.0 } else { 0.0 });
                let a = params.alpha;
                let prob =
                    [0, 1].map(|c| sums[c].iter().map(|&k| (k + a) / (count[c] as f64 + 2.0 * a)).collect::<Vec<_>>());
                Likelihood::Bernoulli {
                    log_p: [0, 1].map(|c| prob[c].iter().map(|q| q.ln()).collect()),
                    log_q: [0, 1].map(|c| prob[c].iter().map(|q| (1.0 - q).ln()).collect()),
                    threshold: t,
                }
            }
            NbVariant::Complement => {
                let sums = class_sums(&|v| v);
                let a = params.alpha;
                let weight = [0, 1].map(|c| {
                    let other = 1 - c;
                    // Complement of class c is, with two classes, the other class.
                    let comp: Vec<f64> = sums[other].iter().map(|s| s + a).collect();
                    let total: f64 = comp.iter().sum();
                    let logged: Vec<f64> = comp.iter().map(|v| (v / total).ln()).collect();
                    if params.norm {
                        let abs: f64 = logged.iter().map(|w| w.abs()).sum();
                        logged.iter().map(|w| -w / abs).collect::<Vec<_>>()
                    } else {
                        logged.iter().map(|w| -w).collect::<Vec<_>>()
                    }
                });
                Likelihood::Complement { weight }
            }
        };
        Ok(Self { log_prior, likelihood, n_features: p })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Unnormalized log posterior for both classes.
    pub fn joint_log_likelihood(&self, row: &[f64]) -> [f64; 2] {
        [0, 1].map(|c| match &self.likelihood {
            Likelihood::Gaussian { mean, var } => {
                self.log_prior[c]
                    + row
                        .iter()
                        .zip(&mean[c])
                        .zip(&var[c])
                        .map(|((x, m), v)| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - m) * (x - m) / (2.0 * v))
                        .sum::<f64>()
            }
            Likelihood::Multinomial { log_theta } => {
                self.log_prior[c] + row.iter().zip(&log_theta[c]).map(|(x, lt)| x * lt).sum::<f64>()
            }
            Likelihood::Bernoulli { log_p, log_q, threshold } => {
                self.log_prior[c]
                    + row
                        .iter()
                        .enumerate()
                        .map(|(j, &x)| if x > *threshold { log_p[c][j] } else { log_q[c][j] })
                        .sum::<f64>()
            }
            Likelihood::Complement { weight } => row.iter().zip(&weight[c]).map(|(x, w)| x * w).sum(),
        })
    }

    /// Posterior probability of class 1, via log-sum-exp.
    pub fn posterior(&self, row: &[f64]) -> f64 {
        let [a, b] = self.joint_log_likelihood(row);
        let m = a.max(b);
        let lse = m + ((a - m).exp() + (b - m).exp()).ln();
        (b - lse).exp()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<Prediction> {
        x.iter_rows()
            .map(|r| {
                let [a, b] = self.joint_log_likelihood(r);
                Prediction { label: u8::from(b > a), score: self.posterior(r) }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(variant: NbVariant) -> NbParams {
        NbParams { variant, ..Default::default() }
    }

    #[test]
    fn gaussian_symmetric_classes() {
        let x = Matrix::from_rows(&[[-1.0], [0.0], [1.0], [9.0], [10.0], [11.0]]).unwrap();
        let y = [0, 0, 0, 1, 1, 1];
        let m = NaiveBayes::fit(&x, &y, &params(NbVariant::Gaussian)).unwrap();
        let q = Matrix::from_rows(&[[0.0], [5.0]]).unwrap();
        let p = m.predict(&q);
        assert_eq!(p[0].label, 0);
        assert!((p[1].score - 0.5).abs() < 1e-9);
    }

    #[test]
    fn missing_class_and_negative_counts() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(NaiveBayes::fit(&x, &[1, 1], &params(NbVariant::Gaussian)).is_err());
        let neg = Matrix::from_rows(&[[-1.0], [2.0]]).unwrap();
        assert!(NaiveBayes::fit(&neg, &[0, 1], &params(NbVariant::Multinomial)).is_err());
        assert!(NaiveBayes::fit(&neg, &[0, 1], &params(NbVariant::Complement)).is_err());
        assert!(NaiveBayes::fit(&neg, &[0, 1], &params(NbVariant::Bernoulli)).is_ok());
    }
}
