//! Building blocks shared by the feed-forward and recurrent networks:
//! activations, output heads and first-order optimizers over flat parameter
//! vectors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::param("activation", format!("unknown activation {other:?} (relu, tanh, sigmoid)"))),
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative at pre-activation `z`, given `a = apply(z)`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Output head and its loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    /// One sigmoid unit with binary cross entropy.
    BinaryCe,
    /// Two logits through softmax with categorical cross entropy on the class index.
    SparseCategoricalCe,
}

impl Output {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bc" | "binary_crossentropy" => Ok(Output::BinaryCe),
            "scc" | "sparse_categorical_crossentropy" => Ok(Output::SparseCategoricalCe),
            other => Err(Error::param("loss", format!("unknown loss {other:?} (bc, scc)"))),
        }
    }

    pub fn units(self) -> usize {
        match self {
            Output::BinaryCe => 1,
            Output::SparseCategoricalCe => 2,
        }
    }

    /// Probability of class 1 from the head's logits.
    pub fn probability(self, z: &[f64]) -> f64 {
        match self {
            Output::BinaryCe => sigmoid(z[0]),
            Output::SparseCategoricalCe => sigmoid(z[1] - z[0]),
        }
    }

    /// Loss for one example and its gradient with respect to the logits.
    pub fn loss_grad(self, z: &[f64], y: u8, dz: &mut [f64]) -> f64 {
        const EPS: f64 = 1e-12;
        match self {
            Output::BinaryCe => {
                let p = sigmoid(z[0]);
                dz[0] = p - y as f64;
                if y == 1 {
                    -(p.max(EPS)).ln()
                } else {
                    -((1.0 - p).max(EPS)).ln()
                }
            }
            Output::SparseCategoricalCe => {
                let m = z[0].max(z[1]);
                let e0 = (z[0] - m).exp();
                let e1 = (z[1] - m).exp();
                let s = e0 + e1;
                let p = [e0 / s, e1 / s];
                dz[0] = p[0] - f64::from(y == 0);
                dz[1] = p[1] - f64::from(y == 1);
                -(p[y as usize].max(EPS)).ln()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    RmsProp,
    Adam,
    Nadam,
}

impl OptimizerKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "rmsprop" | "rms" => Ok(OptimizerKind::RmsProp),
            "adam" => Ok(OptimizerKind::Adam),
            "nadam" => Ok(OptimizerKind::Nadam),
            other => Err(Error::param("optimizer", format!("unknown optimizer {other:?} (sgd, rmsprop, adam, nadam)"))),
        }
    }

    /// Library-default step size.
    pub fn default_learning_rate(self) -> f64 {
        match self {
            OptimizerKind::Sgd => 0.01,
            _ => 0.001,
        }
    }
}

/// Optimizer with its moment buffers.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const RHO: f64 = 0.9;
const EPSILON: f64 = 1e-7;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n: usize) -> Self {
        Self { kind, lr, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let lr = self.lr;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::RmsProp => {
                for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.v) {
                    *v = RHO * *v + (1.0 - RHO) * g * g;
                    *p -= lr * g / (v.sqrt() + EPSILON);
                }
            }
            OptimizerKind::Adam | OptimizerKind::Nadam => {
                let b1t = 1.0 - BETA1.powi(self.t);
                let b2t = 1.0 - BETA2.powi(self.t);
                let nesterov = self.kind == OptimizerKind::Nadam;
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    *m = BETA1 * *m + (1.0 - BETA1) * g;
                    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    let m_hat = if nesterov {
                        BETA1 * *m / (1.0 - BETA1.powi(self.t + 1)) + (1.0 - BETA1) * g / b1t
                    } else {
                        *m / b1t
                    };
                    let v_hat = *v / b2t;
                    *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
                }
            }
        }
    }
}

/// Uniform initialization with variance `1 / fan_in`.
pub fn init_uniform<R: Rng>(rng: &mut R, out: &mut [f64], fan_in: usize) {
    let limit = (3.0 / fan_in.max(1) as f64).sqrt();
    for w in out {
        *w = rng.random_range(-limit..=limit);
    }
}

/// Inverted-dropout mask: kept units are scaled by `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng>(rng: &mut R, n: usize, rate: f64) -> Vec<f64> {
    if rate <= 0.0 {
        return vec![1.0; n];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..n).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_pair_matches_sigmoid_loss() {
        let mut d1 = [0.0];
        let mut d2 = [0.0; 2];
        for &z in &[-3.0, -0.2, 0.0, 1.7] {
            for y in [0, 1] {
                let a = Output::BinaryCe.loss_grad(&[z], y, &mut d1);
                let b = Output::SparseCategoricalCe.loss_grad(&[0.0, z], y, &mut d2);
                assert!((a - b).abs() < 1e-12);
                assert!((d1[0] - d2[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn optimizers_descend_quadratic() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::RmsProp, OptimizerKind::Adam, OptimizerKind::Nadam] {
            let mut p = vec![3.0, -2.0];
            let mut opt = Optimizer::new(kind, 0.05, 2);
            for _ in 0..2000 {
                let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
                opt.step(&mut p, &g);
            }
            assert!(p.iter().all(|x| x.abs() < 0.05), "{kind:?} {p:?}");
        }
    }
}
