use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nn::{dropout_mask, init_uniform, Activation, Optimizer, OptimizerKind, Output};
use super::{check_xy, ModelSpec, Prediction};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const PARAMS: &[&str] = &[
    "hidden_layers",
    "hidden_units",
    "activation",
    "optimizer",
    "loss",
    "epochs",
    "dropout",
    "batch_size",
    "learning_rate",
    "zero_init",
];

#[derive(Clone, Debug, PartialEq)]
pub struct AnnParams {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub output: Output,
    pub epochs: usize,
    pub dropout: f64,
    pub batch_size: usize,
    /// Start from all-zero weights instead of random ones.
    pub zero_init: bool,
}

impl Default for AnnParams {
    fn default() -> Self {
        Self {
            hidden: vec![20],
            activation: Activation::Relu,
            optimizer: OptimizerKind::Adam,
            learning_rate: OptimizerKind::Adam.default_learning_rate(),
            output: Output::BinaryCe,
            epochs: 100,
            dropout: 0.2,
            batch_size: 32,
            zero_init: false,
        }
    }
}

pub(crate) fn parse_dropout(spec: &ModelSpec, default: f64) -> Result<f64> {
    let d = spec.f64_or("dropout", default)?;
    if !(0.0..1.0).contains(&d) {
        return Err(Error::param("dropout", "must be in [0, 1)"));
    }
    Ok(d)
}

impl AnnParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let d = Self::default();
        let layers = spec.usize_or("hidden_layers", 1)?;
        let units = spec.usize_or("hidden_units", d.hidden[0])?;
        if layers < 1 || units < 1 {
            return Err(Error::param("hidden_units", "need at least one layer of at least one unit"));
        }
        let optimizer = OptimizerKind::parse(spec.str_or("optimizer", "adam")?)?;
        let epochs = spec.usize_or("epochs", d.epochs)?;
        if epochs < 1 {
            return Err(Error::param("epochs", "must be at least 1"));
        }
        let batch_size = spec.usize_or("batch_size", d.batch_size)?;
        if batch_size < 1 {
            return Err(Error::param("batch_size", "must be at least 1"));
        }
        let learning_rate = spec.f64_or("learning_rate", optimizer.default_learning_rate())?;
        if !(learning_rate > 0.0) {
            return Err(Error::param("learning_rate", "must be positive"));
        }
        Ok(Self {
            hidden: vec![units; layers],
            activation: Activation::parse(spec.str_or("activation", "relu")?)?,
            optimizer,
            learning_rate,
            output: Output::parse(spec.str_or("loss", "bc")?)?,
            epochs,
            dropout: parse_dropout(spec, d.dropout)?,
            batch_size,
            zero_init: spec.bool_or("zero_init", false)?,
        })
    }

    /// Settings outside the searched levels are allowed but reported.
    pub fn grid_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !(1..=2).contains(&self.hidden.len()) {
            w.push(format!("ann: {} hidden layers is outside the searched 1-2", self.hidden.len()));
        }
        if let Some(u) = self.hidden.iter().find(|u| !(10..=50).contains(*u)) {
            w.push(format!("ann: {u} hidden units is outside the searched 10-50"));
        }
        w
    }
}

/// Fully connected network. Parameters live in one flat vector: for each layer
/// the `out x in` weight block (row-major) followed by `out` biases.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub output: Output,
    pub params: Vec<f64>,
}

struct Trace {
    /// Pre-activations per layer (including the output logits).
    z: Vec<Vec<f64>>,
    /// Layer inputs after activation and dropout; `a[0]` is the input row.
    a: Vec<Vec<f64>>,
    masks: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn new(n_inputs: usize, hidden: &[usize], activation: Activation, output: Output) -> Self {
        let mut sizes = vec![n_inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(output.units());
        let n = sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum();
        Self { sizes, activation, output, params: vec![0.0; n] }
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = vec![0];
        for w in self.sizes.windows(2) {
            off.push(off.last().unwrap() + w[1] * w[0] + w[1]);
        }
        off
    }

    pub fn init<R: rand::Rng>(&mut self, rng: &mut R) {
        let off = self.offsets();
        for l in 0..self.sizes.len() - 1 {
            let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
            init_uniform(rng, &mut self.params[off[l]..off[l] + fi * fo], fi);
            self.params[off[l] + fi * fo..off[l + 1]].fill(0.0);
        }
    }

    pub fn n_features(&self) -> usize {
        self.sizes[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, p: &[f64]) {
        self.params.copy_from_slice(p);
    }

    fn forward(&self, row: &[f64], masks: Option<&[Vec<f64>]>) -> Trace {
        let off = self.offsets();
        let layers = self.sizes.len() - 1;
        let mut t = Trace { z: Vec::with_capacity(layers), a: vec![row.to_vec()], masks: Vec::new() };
        for l in 0..layers {
            let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off[l]..off[l] + fi * fo];
            let b = &self.params[off[l] + fi * fo..off[l + 1]];
            let input = &t.a[l];
            let z: Vec<f64> = (0..fo)
                .map(|o| b[o] + w[o * fi..(o + 1) * fi].iter().zip(input).map(|(a, x)| a * x).sum::<f64>())
                .collect();
            if l + 1 < layers {
                let mut a: Vec<f64> = z.iter().map(|&v| self.activation.apply(v)).collect();
                if let Some(m) = masks {
                    for (v, k) in a.iter_mut().zip(&m[l]) {
                        *v *= k;
                    }
                }
                t.a.push(a);
            }
            t.z.push(z);
        }
        if let Some(m) = masks {
            t.masks = m.to_vec();
        }
        t
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        let t = self.forward(row, None);
        self.output.probability(t.z.last().unwrap())
    }

    /// Adds the loss gradient for one example into `grad`; returns the loss.
    fn backprop(&self, row: &[f64], y: u8, masks: Option<&[Vec<f64>]>, grad: &mut [f64]) -> f64 {
        let off = self.offsets();
        let layers = self.sizes.len() - 1;
        let t = self.forward(row, masks);
        let mut delta = vec![0.0; self.output.units()];
        let loss = self.output.loss_grad(t.z.last().unwrap(), y, &mut delta);
        for l in (0..layers).rev() {
            let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
            let input = &t.a[l];
            for o in 0..fo {
                let g = &mut grad[off[l] + o * fi..off[l] + (o + 1) * fi];
                for (gw, x) in g.iter_mut().zip(input) {
                    *gw += delta[o] * x;
                }
                grad[off[l] + fi * fo + o] += delta[o];
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off[l]..off[l] + fi * fo];
            let mut prev = vec![0.0; fi];
            for o in 0..fo {
                for (p, wv) in prev.iter_mut().zip(&w[o * fi..(o + 1) * fi]) {
                    *p += delta[o] * wv;
                }
            }
            // Back through dropout then the activation of layer l-1.
            let z = &t.z[l - 1];
            for k in 0..fi {
                let a = self.activation.apply(z[k]);
                let m = if t.masks.is_empty() { 1.0 } else { t.masks[l - 1][k] };
                prev[k] *= m * self.activation.derivative(z[k], a);
            }
            delta = prev;
        }
        loss
    }

    /// Mean loss and gradient over `rows`, without dropout.
    pub fn loss_and_grad(&self, x: &Matrix, y: &[u8], rows: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for &i in rows {
            loss += self.backprop(x.row(i), y[i], None, &mut grad);
        }
        let n = rows.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    pub fn fit(x: &Matrix, y: &[u8], p: &AnnParams, seed: u64) -> Result<Self> {
        check_xy(x, y)?;
        if x.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite feature value".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Mlp::new(x.cols(), &p.hidden, p.activation, p.output);
        if !p.zero_init {
            net.init(&mut rng);
        }
        let mut opt = Optimizer::new(p.optimizer, p.learning_rate, net.params.len());
        let mut order: Vec<usize> = (0..x.rows()).collect();
        let mut grad = vec![0.0; net.params.len()];
        for epoch in 0..p.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(p.batch_size) {
                grad.fill(0.0);
                for &i in batch {
                    let masks: Vec<Vec<f64>> = p.hidden.iter().map(|&h| dropout_mask(&mut rng, h, p.dropout)).collect();
                    epoch_loss += net.backprop(x.row(i), y[i], Some(&masks), &mut grad);
                }
                let n = batch.len() as f64;
                grad.iter_mut().for_each(|g| *g /= n);
                opt.step(&mut net.params, &grad);
            }
            if !epoch_loss.is_finite() || net.params.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
        }
        Ok(net)
    }

    pub fn predict(&self, x: &Matrix) -> Vec<Prediction> {
        crate::par::map_range(x.rows(), |i| Prediction::from_probability(self.probability(x.row(i))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_init_predicts_half() {
        let x = Matrix::from_rows(&[[1.0, -2.0], [0.3, 4.0]]).unwrap();
        let net = Mlp::new(2, &[10], Activation::Tanh, Output::BinaryCe);
        assert!(net.predict(&x).iter().all(|p| p.score == 0.5));
    }

    #[test]
    fn warnings_for_off_grid_shapes() {
        let spec = ModelSpec::new(crate::models::Family::Ann).with("hidden_layers", 3i64).with("hidden_units", 64i64);
        let p = AnnParams::from_spec(&spec).unwrap();
        assert_eq!(p.grid_warnings().len(), 2);
    }
}
