//! Peephole LSTM classifier trained by backpropagation through time.
//!
//! Per layer and step, with `act` the configurable cell activation:
//!
//! ```text
//! i = sigmoid(Wxi x + Whi h' + wci * c' + bi)
//! f = sigmoid(Wxf x + Whf h' + wcf * c' + bf)
//! c = f * c' + i * act(Wxc x + Whc h' + bc)
//! o = sigmoid(Wxo x + Who h' + wco * c + bo)
//! h = o * act(c)
//! ```
//!
//! where `h'` and `c'` are the previous step's states and peephole weights act
//! elementwise. The last step's top-layer state feeds a dense output head.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ann::parse_dropout;
use super::nn::{dropout_mask, init_uniform, sigmoid, Activation, Optimizer, OptimizerKind, Output};
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
    "lookback",
    "zero_init",
];

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub output: Output,
    pub epochs: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub lookback: usize,
    pub zero_init: bool,
}

impl Default for LstmParams {
    fn default() -> Self {
        Self {
            hidden: vec![20],
            activation: Activation::Tanh,
            optimizer: OptimizerKind::Adam,
            learning_rate: OptimizerKind::Adam.default_learning_rate(),
            output: Output::SparseCategoricalCe,
            epochs: 50,
            dropout: 0.2,
            batch_size: 32,
            lookback: 7,
            zero_init: false,
        }
    }
}

impl LstmParams {
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
        let lookback = spec.usize_or("lookback", d.lookback)?;
        if lookback < 1 {
            return Err(Error::param("lookback", "must be at least 1"));
        }
        let learning_rate = spec.f64_or("learning_rate", optimizer.default_learning_rate())?;
        if !(learning_rate > 0.0) {
            return Err(Error::param("learning_rate", "must be positive"));
        }
        Ok(Self {
            hidden: vec![units; layers],
            activation: Activation::parse(spec.str_or("activation", "tanh")?)?,
            optimizer,
            learning_rate,
            output: Output::parse(spec.str_or("loss", "scc")?)?,
            epochs,
            dropout: parse_dropout(spec, d.dropout)?,
            batch_size,
            lookback,
            zero_init: spec.bool_or("zero_init", false)?,
        })
    }

    pub fn grid_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !(1..=2).contains(&self.hidden.len()) {
            w.push(format!("lstm: {} hidden layers is outside the searched 1-2", self.hidden.len()));
        }
        if let Some(u) = self.hidden.iter().find(|u| !(10..=50).contains(*u)) {
            w.push(format!("lstm: {u} hidden units is outside the searched 10-50"));
        }
        w
    }
}

/// Offsets of one layer's blocks in the flat parameter vector.
#[derive(Clone, Copy, Debug)]
struct LayerLayout {
    input: usize,
    hidden: usize,
    wx: usize,
    wh: usize,
    peep: usize,
    bias: usize,
    end: usize,
}

/// Per-step state of one layer kept for the backward pass.
#[derive(Clone, Debug, Default)]
struct Step {
    /// Gate values i, f, g (cell candidate), o; each `hidden` long.
    gates: [Vec<f64>; 4],
    /// Candidate pre-activation, needed for the activation derivative.
    zg: Vec<f64>,
    c: Vec<f64>,
    act_c: Vec<f64>,
    h: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Lstm {
    pub n_inputs: usize,
    pub lookback: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub output: Output,
    pub params: Vec<f64>,
}

impl Lstm {
    pub fn new(n_inputs: usize, lookback: usize, hidden: &[usize], activation: Activation, output: Output) -> Self {
        let mut net = Self { n_inputs, lookback, hidden: hidden.to_vec(), activation, output, params: Vec::new() };
        let (_, head) = net.layout();
        net.params = vec![0.0; head + output.units() * hidden.last().copied().unwrap_or(0) + output.units()];
        net
    }

    fn layout(&self) -> (Vec<LayerLayout>, usize) {
        let mut at = 0;
        let mut input = self.n_inputs;
        let mut out = Vec::with_capacity(self.hidden.len());
        for &h in &self.hidden {
            let wx = at;
            let wh = wx + 4 * h * input;
            let peep = wh + 4 * h * h;
            let bias = peep + 3 * h;
            let end = bias + 4 * h;
            out.push(LayerLayout { input, hidden: h, wx, wh, peep, bias, end });
            at = end;
            input = h;
        }
        (out, at)
    }

    pub fn init<R: rand::Rng>(&mut self, rng: &mut R) {
        let (layouts, head) = self.layout();
        for l in &layouts {
            let h = l.hidden;
            init_uniform(rng, &mut self.params[l.wx..l.wh], l.input);
            init_uniform(rng, &mut self.params[l.wh..l.peep], h);
            init_uniform(rng, &mut self.params[l.peep..l.bias], 1);
            self.params[l.bias..l.end].fill(0.0);
            // Forget-gate bias starts at one.
            self.params[l.bias + h..l.bias + 2 * h].fill(1.0);
        }
        let h = *self.hidden.last().unwrap();
        let units = self.output.units();
        init_uniform(rng, &mut self.params[head..head + units * h], h);
        self.params[head + units * h..].fill(0.0);
    }

    pub fn n_features(&self) -> usize {
        self.n_inputs * self.lookback
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, p: &[f64]) {
        self.params.copy_from_slice(p);
    }

    /// Splits a flattened window (oldest step first) into per-step inputs.
    fn steps<'a>(&self, row: &'a [f64]) -> Vec<&'a [f64]> {
        row.chunks(self.n_inputs).collect()
    }

    fn forward(&self, row: &[f64], masks: Option<&[Vec<f64>]>) -> (Vec<Vec<Step>>, Vec<f64>) {
        let (layouts, head) = self.layout();
        let p = &self.params;
        let mut inputs: Vec<Vec<f64>> = self.steps(row).into_iter().map(<[f64]>::to_vec).collect();
        let mut all = Vec::with_capacity(layouts.len());
        for (li, l) in layouts.iter().enumerate() {
            let h = l.hidden;
            let mut prev_h = vec![0.0; h];
            let mut prev_c = vec![0.0; h];
            let mut steps = Vec::with_capacity(inputs.len());
            for x in &inputs {
                let mut z = p[l.bias..l.end].to_vec();
                for (r, zr) in z.iter_mut().enumerate() {
                    let wx = &p[l.wx + r * l.input..l.wx + (r + 1) * l.input];
                    let wh = &p[l.wh + r * h..l.wh + (r + 1) * h];
                    *zr += wx.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                        + wh.iter().zip(&prev_h).map(|(a, b)| a * b).sum::<f64>();
                }
                let peep = &p[l.peep..l.bias];
                let mut s = Step {
                    gates: [vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]],
                    zg: z[2 * h..3 * h].to_vec(),
                    c: vec![0.0; h],
                    act_c: vec![0.0; h],
                    h: vec![0.0; h],
                };
                for k in 0..h {
                    let i = sigmoid(z[k] + peep[k] * prev_c[k]);
                    let f = sigmoid(z[h + k] + peep[h + k] * prev_c[k]);
                    let g = self.activation.apply(z[2 * h + k]);
                    let c = f * prev_c[k] + i * g;
                    let o = sigmoid(z[3 * h + k] + peep[2 * h + k] * c);
                    let ac = self.activation.apply(c);
                    s.gates[0][k] = i;
                    s.gates[1][k] = f;
                    s.gates[2][k] = g;
                    s.gates[3][k] = o;
                    s.c[k] = c;
                    s.act_c[k] = ac;
                    s.h[k] = o * ac;
                }
                prev_h.clone_from(&s.h);
                prev_c.clone_from(&s.c);
                steps.push(s);
            }
            inputs = steps
                .iter()
                .map(|s| match masks {
                    Some(m) => s.h.iter().zip(&m[li]).map(|(a, b)| a * b).collect(),
                    None => s.h.clone(),
                })
                .collect();
            all.push(steps);
        }
        let top = inputs.last().cloned().unwrap_or_default();
        let h = top.len();
        let logits = (0..self.output.units())
            .map(|u| {
                p[head + self.output.units() * h + u]
                    + p[head + u * h..head + (u + 1) * h].iter().zip(&top).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        (all, logits)
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        self.output.probability(&self.forward(row, None).1)
    }

    fn backprop(&self, row: &[f64], y: u8, masks: Option<&[Vec<f64>]>, grad: &mut [f64]) -> f64 {
        let (layouts, head) = self.layout();
        let p = &self.params;
        let (states, logits) = self.forward(row, masks);
        let units = self.output.units();
        let mut dz = vec![0.0; units];
        let loss = self.output.loss_grad(&logits, y, &mut dz);
        let t_len = states[0].len();
        let mask = |li: usize, k: usize| masks.map_or(1.0, |m| m[li][k]);

        let top = layouts.len() - 1;
        let ht = layouts[top].hidden;
        let top_h: Vec<f64> = (0..ht).map(|k| states[top][t_len - 1].h[k] * mask(top, k)).collect();
        // Gradient flowing into each step's (masked) output of the current layer.
        let mut d_out = vec![vec![0.0; ht]; t_len];
        for u in 0..units {
            for k in 0..ht {
                grad[head + u * ht + k] += dz[u] * top_h[k];
                d_out[t_len - 1][k] += dz[u] * p[head + u * ht + k];
            }
            grad[head + units * ht + u] += dz[u];
        }

        let raw_inputs: Vec<&[f64]> = self.steps(row);
        for li in (0..layouts.len()).rev() {
            let l = layouts[li];
            let h = l.hidden;
            let peep = &p[l.peep..l.bias];
            let mut d_below = vec![vec![0.0; l.input]; t_len];
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            for t in (0..t_len).rev() {
                let s = &states[li][t];
                let zero = vec![0.0; h];
                let (prev_h, prev_c) =
                    if t > 0 { (&states[li][t - 1].h, &states[li][t - 1].c) } else { (&zero, &zero) };
                let x: Vec<f64> = if li == 0 {
                    raw_inputs[t].to_vec()
                } else {
                    (0..l.input).map(|k| states[li - 1][t].h[k] * mask(li - 1, k)).collect()
                };
                let mut da = vec![0.0; 4 * h];
                let mut dc_prev = vec![0.0; h];
                for k in 0..h {
                    let [i, f, g, o] = [s.gates[0][k], s.gates[1][k], s.gates[2][k], s.gates[3][k]];
                    let dh = d_out[t][k] * mask(li, k) + dh_next[k];
                    let do_ = dh * s.act_c[k];
                    let da_o = do_ * o * (1.0 - o);
                    let dc =
                        dc_next[k] + dh * o * self.activation.derivative(s.c[k], s.act_c[k]) + da_o * peep[2 * h + k];
                    let da_i = dc * g * i * (1.0 - i);
                    let da_f = dc * prev_c[k] * f * (1.0 - f);
                    let da_g = dc * i * self.activation.derivative(s.zg[k], g);
                    dc_prev[k] = dc * f + da_i * peep[k] + da_f * peep[h + k];
                    grad[l.peep + k] += da_i * prev_c[k];
                    grad[l.peep + h + k] += da_f * prev_c[k];
                    grad[l.peep + 2 * h + k] += da_o * s.c[k];
                    da[k] = da_i;
                    da[h + k] = da_f;
                    da[2 * h + k] = da_g;
                    da[3 * h + k] = da_o;
                }
                let mut dh_prev = vec![0.0; h];
                for (r, &d) in da.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    grad[l.bias + r] += d;
                    let wx = l.wx + r * l.input;
                    for (k, xv) in x.iter().enumerate() {
                        grad[wx + k] += d * xv;
                        d_below[t][k] += d * p[wx + k];
                    }
                    let wh = l.wh + r * h;
                    for k in 0..h {
                        grad[wh + k] += d * prev_h[k];
                        dh_prev[k] += d * p[wh + k];
                    }
                }
                dh_next = dh_prev;
                dc_next = dc_prev;
            }
            d_out = d_below;
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

    /// Rows of `x` are flattened windows of `p.lookback` steps.
    pub fn fit(x: &Matrix, y: &[u8], p: &LstmParams, seed: u64) -> Result<Self> {
        check_xy(x, y)?;
        if !x.cols().is_multiple_of(p.lookback) {
            return Err(Error::DimensionMismatch {
                expected: p.lookback * (x.cols() / p.lookback).max(1),
                got: x.cols(),
            });
        }
        if x.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite feature value".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Lstm::new(x.cols() / p.lookback, p.lookback, &p.hidden, p.activation, p.output);
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
