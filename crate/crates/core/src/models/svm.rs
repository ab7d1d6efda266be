//! Soft-margin C-SVM trained by sequential minimal optimization.
//!
//! The solver follows the second-order working-set selection of Fan, Chen and
//! Lin (the libsvm default) without shrinking. With labels `y` in {-1, +1} and
//! `Q_ij = y_i y_j K(x_i, x_j)` it minimizes `f(a) = a'Qa/2 - sum(a)` subject to
//! `0 <= a_i <= C` and `sum(y_i a_i) = 0`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{check_xy, ModelSpec, Prediction};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const PARAMS: &[&str] = &["kernel", "degree", "gamma", "coef0", "c", "tol", "max_iter"];

const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    /// `(gamma * <a, b> + coef0)^degree`
    Poly {
        degree: u32,
        gamma: f64,
        coef0: f64,
    },
}

impl Kernel {
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        match *self {
            Kernel::Linear => dot,
            Kernel::Poly { degree, gamma, coef0 } => (gamma * dot + coef0).powi(degree as i32),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Rows kept in the kernel cache.
    pub cache_rows: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { kernel: Kernel::Linear, c: 1.0, tol: 1e-3, max_iter: 1_000_000, cache_rows: 4096 }
    }
}

impl SvmParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let d = Self::default();
        let kernel = match spec.str_or("kernel", "linear")? {
            "linear" => Kernel::Linear,
            "poly" => {
                let degree = spec.f64_or("degree", 3.0)?;
                if !(degree >= 1.0) || degree.fract() != 0.0 {
                    return Err(Error::param("degree", "must be an integer of at least 1"));
                }
                let gamma = spec.f64_or("gamma", 1.0)?;
                if !(gamma > 0.0) {
                    return Err(Error::param("gamma", "must be positive"));
                }
                let coef0 = spec.f64_or("coef0", 0.0)?;
                if !(coef0 >= 0.0) {
                    return Err(Error::param("coef0", "must be non-negative"));
                }
                Kernel::Poly { degree: degree as u32, gamma, coef0 }
            }
            other => return Err(Error::param("kernel", format!("unknown kernel {other:?} (linear, poly)"))),
        };
        let c = spec.f64_or("c", d.c)?;
        if !(c > 0.0) {
            return Err(Error::param("c", "must be positive"));
        }
        let tol = spec.f64_or("tol", d.tol)?;
        if !(tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        Ok(Self { kernel, c, tol, max_iter: spec.usize_or("max_iter", d.max_iter)?, cache_rows: d.cache_rows })
    }
}

struct KernelCache<'a> {
    x: &'a Matrix,
    kernel: Kernel,
    rows: Vec<Option<Box<[f64]>>>,
    order: VecDeque<usize>,
    cap: usize,
    diag: Vec<f64>,
}

impl<'a> KernelCache<'a> {
    fn new(x: &'a Matrix, kernel: Kernel, cap: usize) -> Self {
        let diag = (0..x.rows()).map(|i| kernel.eval(x.row(i), x.row(i))).collect();
        Self { x, kernel, rows: vec![None; x.rows()], order: VecDeque::new(), cap: cap.max(2), diag }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if self.rows[i].is_none() {
            if self.order.len() >= self.cap {
                if let Some(old) = self.order.pop_front() {
                    self.rows[old] = None;
                }
            }
            let xi = self.x.row(i);
            let r: Box<[f64]> = (0..self.x.rows()).map(|j| self.kernel.eval(xi, self.x.row(j))).collect();
            self.rows[i] = Some(r);
            self.order.push_back(i);
        }
        self.rows[i].as_deref().expect("row cached above")
    }
}

/// Dual solution with diagnostics.
#[derive(Clone, Debug)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Offset such that `decision(x) = sum(a_i y_i K(x_i, x)) - rho`.
    pub rho: f64,
    pub iterations: usize,
    /// Final maximal violating-pair gap `m(a) - M(a)`.
    pub kkt_gap: f64,
    /// Dual objective `sum(a) - a'Qa/2` after each iteration, when traced.
    pub objective_trace: Vec<f64>,
}

fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (1.0 - g)).sum::<f64>()
}

/// Runs SMO on `x` with labels in {-1, +1}.
pub fn solve_smo(x: &Matrix, y: &[f64], params: &SvmParams, trace: bool) -> Result<SmoSolution> {
    let n = x.rows();
    let c = params.c;
    let mut cache = KernelCache::new(x, params.kernel, params.cache_rows);
    let mut alpha = vec![0.0; n];
    // Gradient of f: G = Qa - e.
    let mut grad = vec![-1.0; n];
    let mut objective_trace = Vec::new();
    let up = |a: f64, yt: f64| if yt > 0.0 { a < c } else { a > 0.0 };
    let low = |a: f64, yt: f64| if yt > 0.0 { a > 0.0 } else { a < c };

    let mut iterations = 0;
    let kkt_gap = loop {
        // Select i: max over I_up of -y_t G_t.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v >= gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if i != usize::MAX {
            let qd_i = cache.diag[i];
            let ki: Vec<f64> = cache.row(i).to_vec();
            for t in 0..n {
                if !low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                if -v >= gmax2 {
                    gmax2 = -v;
                }
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = qd_i + cache.diag[t] - 2.0 * ki[t];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj <= obj_min {
                        obj_min = obj;
                        j = t;
                    }
                }
            }
        }
        let gap = gmax + gmax2;
        if i == usize::MAX || j == usize::MAX || gap < params.tol {
            break if gap.is_finite() { gap.max(0.0) } else { 0.0 };
        }
        if iterations >= params.max_iter {
            let m = gmax;
            let big_m = -gmax2;
            let violations = (0..n)
                .filter(|&t| {
                    let v = -y[t] * grad[t];
                    (up(alpha[t], y[t]) && v - big_m > params.tol) || (low(alpha[t], y[t]) && m - v > params.tol)
                })
                .count();
            return Err(Error::NotConverged { iterations, violations });
        }
        iterations += 1;

        let ki: Vec<f64> = cache.row(i).to_vec();
        let kj: Vec<f64> = cache.row(j).to_vec();
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (qii, qjj) = (cache.diag[i], cache.diag[j]);
        let qij = y[i] * y[j] * ki[j];
        if y[i] != y[j] {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
        if trace {
            objective_trace.push(dual_objective(&alpha, &grad));
        }
    };

    // Offset from free vectors, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 };
    Ok(SmoSolution { alpha, rho, iterations, kkt_gap, objective_trace })
}

/// Support vectors with coefficients `a_i y_i`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Svm {
    pub kernel: Kernel,
    pub support: Matrix,
    pub coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

impl Svm {
    pub fn fit(x: &Matrix, y: &[u8], params: &SvmParams) -> Result<Self> {
        check_xy(x, y)?;
        let ys: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
        let sol = solve_smo(x, &ys, params, false)?;
        let sv: Vec<usize> = (0..x.rows()).filter(|&i| sol.alpha[i] > 0.0).collect();
        Ok(Self {
            kernel: params.kernel,
            support: x.select_rows(&sv),
            coef: sv.iter().map(|&i| sol.alpha[i] * ys[i]).collect(),
            bias: -sol.rho,
            iterations: sol.iterations,
        })
    }

    pub fn n_features(&self) -> usize {
        self.support.cols()
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        self.support.iter_rows().zip(&self.coef).map(|(s, c)| c * self.kernel.eval(s, row)).sum::<f64>() + self.bias
    }

    pub fn predict(&self, x: &Matrix) -> Vec<Prediction> {
        crate::par::map_range(x.rows(), |i| {
            let d = self.decision(x.row(i));
            Prediction { label: u8::from(d > 0.0), score: d }
        })
    }
}
