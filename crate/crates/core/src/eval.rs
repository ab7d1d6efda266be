//! Metrics, validation protocols, significance testing and timing.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::features::Dataset;
use crate::matrix::Matrix;
use crate::models::{self, ModelSpec, Prediction};

/// Runs `f` and returns its result with the elapsed wall-clock seconds.
pub fn timeit<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// A ratio metric. `degenerate` marks a zero denominator, in which case the
/// value is defined as 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

impl Score {
    fn ratio(num: usize, den: usize) -> Self {
        if den == 0 {
            Score { value: 0.0, degenerate: true }
        } else {
            Score { value: num as f64 / den as f64, degenerate: false }
        }
    }
}

fn check_labels(y: &[u8]) -> Result<()> {
    match y.iter().find(|&&v| v > 1) {
        Some(v) => Err(Error::InvalidData(format!("labels must be 0 or 1, found {v}"))),
        None => Ok(()),
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    check_labels(y_true)?;
    check_labels(y_pred)?;
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            _ => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Score {
        Score::ratio(self.tp + self.tn, self.total())
    }

    pub fn error_rate(&self) -> Score {
        Score::ratio(self.fp + self.fn_, self.total())
    }

    pub fn precision(&self) -> Score {
        Score::ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Score {
        Score::ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall.
    pub fn f_score(&self) -> Score {
        let (p, r) = (self.precision(), self.recall());
        if p.value + r.value == 0.0 {
            return Score { value: 0.0, degenerate: true };
        }
        Score { value: 2.0 * p.value * r.value / (p.value + r.value), degenerate: p.degenerate || r.degenerate }
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self { tp: self.tp + other.tp, fp: self.fp + other.fp, tn: self.tn + other.tn, fn_: self.fn_ + other.fn_ }
    }
}

/// Probabilities are clipped to `[EPS, 1 - EPS]` before taking logs.
pub const CROSS_ENTROPY_EPS: f64 = 1e-12;

pub fn cross_entropy(y_true: &[u8], p: &[f64]) -> Result<f64> {
    if y_true.len() != p.len() {
        return Err(Error::LengthMismatch { left: y_true.len(), right: p.len() });
    }
    if y_true.is_empty() {
        return Err(Error::EmptySeries);
    }
    check_labels(y_true)?;
    let sum: f64 = y_true
        .iter()
        .zip(p)
        .map(|(&y, &q)| {
            let q = q.clamp(CROSS_ENTROPY_EPS, 1.0 - CROSS_ENTROPY_EPS);
            if y == 1 {
                q.ln()
            } else {
                (1.0 - q).ln()
            }
        })
        .sum();
    Ok(-sum / y_true.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Rows scoring at least this value are predicted positive.
    #[serde(with = "nonfinite")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// JSON has no infinities; they travel as the strings `"inf"` and `"-inf"`.
mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => s.parse().map_err(|_| serde::de::Error::custom(format!("bad float {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    pub auc: f64,
    /// Starts at (0, 0) with an infinite threshold, one point per distinct score.
    pub points: Vec<RocPoint>,
}

/// AUC by the rank-sum method (tied scores share their average rank, so each
/// tied positive/negative pair counts one half) plus the ROC curve.
pub fn roc_auc(y_true: &[u8], scores: &[f64]) -> Result<Roc> {
    if y_true.len() != scores.len() {
        return Err(Error::LengthMismatch { left: y_true.len(), right: scores.len() });
    }
    check_labels(y_true)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidData("NaN score".into()));
    }
    let pos = y_true.iter().filter(|&&v| v == 1).count();
    let neg = y_true.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidData("AUC needs both classes present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 averaged.
        let avg = (i + j + 2) as f64 / 2.0;
        let group_pos = order[i..=j].iter().filter(|&&k| y_true[k] == 1).count();
        rank_sum += avg * group_pos as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    let auc = (rank_sum - p * (p + 1.0) / 2.0) / (p * n);

    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = order.len();
    while k > 0 {
        let s = scores[order[k - 1]];
        while k > 0 && scores[order[k - 1]] == s {
            if y_true[order[k - 1]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k -= 1;
        }
        points.push(RocPoint { threshold: s, fpr: fp as f64 / n, tpr: tp as f64 / p });
    }
    Ok(Roc { auc, points })
}

/// Area under a piecewise-linear curve through `points`.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum()
}

/// Summary metrics for one set of predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    /// Absent when only one class is present.
    pub auc: Option<f64>,
    pub support: usize,
}

impl Metrics {
    pub fn from_predictions(y_true: &[u8], preds: &[Prediction]) -> Result<Self> {
        let labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
        let cm = confusion(y_true, &labels)?;
        let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
        let auc = roc_auc(y_true, &scores).ok().map(|r| r.auc);
        Ok(Self {
            confusion: cm,
            accuracy: cm.accuracy().value,
            precision: cm.precision().value,
            recall: cm.recall().value,
            f_score: cm.f_score().value,
            auc,
            support: cm.total(),
        })
    }
}

/// Row indices of one train/test partition, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Uniform random split with `round(ratio * n)` test rows.
pub fn train_test_split(n: usize, test_ratio: f64, seed: u64) -> Result<Split> {
    if !(test_ratio > 0.0 && test_ratio < 1.0) {
        return Err(Error::param("test_ratio", "must be strictly between 0 and 1"));
    }
    let n_test = (test_ratio * n as f64).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::param("test_ratio", format!("{test_ratio} of {n} rows leaves an empty side")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(Split { train, test })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub stratified: bool,
    pub seed: u64,
}

impl FoldPlan {
    /// Rows are shuffled and dealt to folds round-robin. Stratified plans deal
    /// class 0 and then class 1 with one running counter, so fold sizes differ
    /// by at most one and so do per-fold class counts.
    pub fn new(labels: &[u8], k: usize, stratified: bool, seed: u64) -> Result<Self> {
        let n = labels.len();
        if k < 2 {
            return Err(Error::param("k", "cross-validation needs at least 2 folds"));
        }
        if k > n {
            return Err(Error::param("k", format!("{k} folds exceed the {n} rows")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut assignments = vec![0; n];
        let groups: Vec<Vec<usize>> = if stratified {
            (0..=1u8).map(|c| (0..n).filter(|&i| labels[i] == c).collect()).collect()
        } else {
            vec![(0..n).collect()]
        };
        let mut next = 0;
        for mut g in groups {
            g.shuffle(&mut rng);
            for i in g {
                assignments[i] = next % k;
                next += 1;
            }
        }
        Ok(Self { k, assignments, stratified, seed })
    }

    /// `(train, validation)` row indices per fold.
    pub fn folds(&self) -> Vec<Split> {
        (0..self.k)
            .map(|f| {
                let (test, train) = (0..self.assignments.len()).partition(|&i| self.assignments[i] == f);
                Split { train, test }
            })
            .collect()
    }
}

/// How a spec is scored on the training window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Protocol {
    Cv {
        k: usize,
        #[serde(default = "default_true")]
        stratified: bool,
    },
    Split {
        ratio: f64,
        seeds: Vec<u64>,
    },
}

fn default_true() -> bool {
    true
}

impl Protocol {
    /// Fails when the protocol cannot run on `n` rows.
    pub fn check_feasible(&self, n: usize) -> Result<()> {
        match self {
            Protocol::Cv { k, .. } => {
                if *k < 2 || *k > n {
                    return Err(Error::param("protocol.k", format!("cv with k = {k} is infeasible on {n} rows")));
                }
            }
            Protocol::Split { ratio, seeds } => {
                if seeds.is_empty() {
                    return Err(Error::param("protocol.seeds", "split protocol needs at least one seed"));
                }
                train_test_split(n, *ratio, 0)?;
            }
        }
        Ok(())
    }
}

/// Predictions and timing from fitting on `train` rows and scoring `test`.
#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub predictions: Vec<Prediction>,
    pub train_seconds: f64,
    pub predict_seconds: f64,
    pub warnings: Vec<String>,
}

fn fit_predict(spec: &ModelSpec, x: &Matrix, y: &[u8], split: &Split, seed: u64) -> Result<FitOutcome> {
    let xtr = x.select_rows(&split.train);
    let ytr: Vec<u8> = split.train.iter().map(|&i| y[i]).collect();
    let xte = x.select_rows(&split.test);
    let (fitted, train_seconds) = timeit(|| models::fit_matrix(spec, &xtr, &ytr, seed));
    let (state, warnings) = fitted?;
    let (predictions, predict_seconds) = timeit(|| state.predict(&xte));
    Ok(FitOutcome { predictions: predictions?, train_seconds, predict_seconds, warnings })
}

/// Result of running a protocol on one dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtocolResult {
    /// Accuracy per fold (cv) or per seed (split); the pairing unit for t-tests.
    pub unit_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Metrics over all held-out predictions pooled together.
    pub pooled: Metrics,
    /// Per held-out row: `(row index, prediction)`; for cv each row appears once.
    pub held_out: Vec<(usize, Prediction)>,
    pub train_seconds: f64,
    pub warnings: Vec<String>,
}

fn pool(y: &[u8], parts: Vec<(Vec<usize>, FitOutcome)>) -> Result<ProtocolResult> {
    let mut unit_accuracy = Vec::with_capacity(parts.len());
    let mut held_out = Vec::new();
    let mut train_seconds = 0.0;
    let mut warnings: Vec<String> = Vec::new();
    for (rows, out) in parts {
        let yt: Vec<u8> = rows.iter().map(|&i| y[i]).collect();
        let labels: Vec<u8> = out.predictions.iter().map(|p| p.label).collect();
        unit_accuracy.push(confusion(&yt, &labels)?.accuracy().value);
        held_out.extend(rows.into_iter().zip(out.predictions));
        train_seconds += out.train_seconds;
        for w in out.warnings {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
    }
    let yt: Vec<u8> = held_out.iter().map(|(i, _)| y[*i]).collect();
    let preds: Vec<Prediction> = held_out.iter().map(|(_, p)| *p).collect();
    let pooled = Metrics::from_predictions(&yt, &preds)?;
    let mean_accuracy = unit_accuracy.iter().sum::<f64>() / unit_accuracy.len() as f64;
    Ok(ProtocolResult { unit_accuracy, mean_accuracy, pooled, held_out, train_seconds, warnings })
}

/// k-fold cross-validation; folds run in parallel, every fit uses `seed`.
pub fn kfold_cv(spec: &ModelSpec, ds: &Dataset, k: usize, stratified: bool, seed: u64) -> Result<ProtocolResult> {
    let prepared = models::prepare(spec, ds)?;
    let plan = FoldPlan::new(&prepared.labels, k, stratified, seed)?;
    let folds = plan.folds();
    let outcomes = crate::par::map_slice(&folds, |s| fit_predict(spec, &prepared.features, &prepared.labels, s, seed));
    let mut parts = Vec::with_capacity(k);
    for (s, o) in folds.into_iter().zip(outcomes) {
        parts.push((s.test, o?));
    }
    let mut result = pool(&prepared.labels, parts)?;
    result.held_out.sort_by_key(|(i, _)| *i);
    Ok(result)
}

/// One random split per seed; the spec is fitted with the same seed as the split.
pub fn seed_sweep(spec: &ModelSpec, ds: &Dataset, ratio: f64, seeds: &[u64]) -> Result<ProtocolResult> {
    if seeds.is_empty() {
        return Err(Error::param("seeds", "need at least one seed"));
    }
    let prepared = models::prepare(spec, ds)?;
    let n = prepared.len();
    let splits: Vec<(u64, Split)> =
        seeds.iter().map(|&s| train_test_split(n, ratio, s).map(|sp| (s, sp))).collect::<Result<_>>()?;
    let outcomes =
        crate::par::map_slice(&splits, |(s, sp)| fit_predict(spec, &prepared.features, &prepared.labels, sp, *s));
    let mut parts = Vec::with_capacity(seeds.len());
    for ((_, sp), o) in splits.into_iter().zip(outcomes) {
        parts.push((sp.test, o?));
    }
    pool(&prepared.labels, parts)
}

pub fn run_protocol(spec: &ModelSpec, ds: &Dataset, protocol: &Protocol, seed: u64) -> Result<ProtocolResult> {
    protocol.check_feasible(ds.len())?;
    match protocol {
        Protocol::Cv { k, stratified } => kfold_cv(spec, ds, *k, *stratified, seed),
        Protocol::Split { ratio, seeds } => seed_sweep(spec, ds, *ratio, seeds),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub df: usize,
    /// Differences have zero spread but a nonzero mean; `t` is infinite and `p` is 0.
    pub degenerate: bool,
}

/// Paired two-sided t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidData("paired t-test needs at least 2 pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let df = n - 1;
    let scale = mean.abs().max(d.iter().map(|v| v.abs()).fold(0.0, f64::max));
    if var <= (1e-15 * scale).powi(2) {
        return Ok(if mean == 0.0 || mean.abs() <= 1e-15 * scale {
            TTest { t: 0.0, p: 1.0, df, degenerate: false }
        } else {
            TTest { t: f64::INFINITY.copysign(mean), p: 0.0, df, degenerate: true }
        });
    }
    let t = mean / (var.sqrt() / nf.sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::InvalidData(e.to_string()))?;
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(TTest { t, p, df, degenerate: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Significance {
    Best,
    TopGroup,
    Other,
}

impl Significance {
    pub fn marker(&self) -> &'static str {
        match self {
            Significance::Best => "*",
            Significance::TopGroup => "+",
            Significance::Other => "",
        }
    }
}

/// Significance level for membership in the top group.
pub const ALPHA: f64 = 0.05;

/// Flags the model with the highest mean (first on ties) as best and every
/// model whose paired test against it gives `p > ALPHA` as top group.
/// `None` entries (failed models) are always `Other`. Vectors that cannot be
/// paired with the best fall back to comparing means for equality.
pub fn top_group(vectors: &[Option<Vec<f64>>]) -> Vec<Significance> {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in vectors.iter().enumerate() {
        if let Some(v) = v.as_deref().filter(|v| !v.is_empty()) {
            let m = mean(v);
            if best.is_none_or(|(_, bm)| m > bm) {
                best = Some((i, m));
            }
        }
    }
    let Some((bi, bm)) = best else {
        return vec![Significance::Other; vectors.len()];
    };
    let bv = vectors[bi].as_deref().unwrap();
    vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if i == bi {
                return Significance::Best;
            }
            let Some(v) = v.as_deref().filter(|v| !v.is_empty()) else {
                return Significance::Other;
            };
            match paired_t_test(bv, v) {
                Ok(t) if t.p > ALPHA => Significance::TopGroup,
                Ok(_) => Significance::Other,
                Err(_) if mean(v) == bm => Significance::TopGroup,
                Err(_) => Significance::Other,
            }
        })
        .collect()
}

/// One model's row in an evaluation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub metrics: Option<Metrics>,
    pub train_seconds: f64,
    pub predict_seconds: f64,
    pub flag: Significance,
    /// Set when the model failed; the metrics are then absent.
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub title: String,
    pub rows: Vec<ReportRow>,
}

pub const REPORT_HEADER: [&str; 15] = [
    "model",
    "accuracy",
    "precision",
    "recall",
    "f_score",
    "auc",
    "tp",
    "fp",
    "tn",
    "fn",
    "support",
    "train_seconds",
    "predict_seconds",
    "flag",
    "error",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EvalReport {
    /// Full-precision CSV. Timing columns are only written when `with_timing`.
    pub fn to_csv(&self, with_timing: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> =
            REPORT_HEADER.iter().copied().filter(|h| with_timing || !h.ends_with("_seconds")).collect();
        w.write_record(&header)?;
        for r in &self.rows {
            let m = r.metrics.as_ref();
            let mut rec = vec![
                r.model.clone(),
                opt(m.map(|m| m.accuracy)),
                opt(m.map(|m| m.precision)),
                opt(m.map(|m| m.recall)),
                opt(m.map(|m| m.f_score)),
                opt(m.and_then(|m| m.auc)),
                m.map(|m| m.confusion.tp.to_string()).unwrap_or_default(),
                m.map(|m| m.confusion.fp.to_string()).unwrap_or_default(),
                m.map(|m| m.confusion.tn.to_string()).unwrap_or_default(),
                m.map(|m| m.confusion.fn_.to_string()).unwrap_or_default(),
                m.map(|m| m.support.to_string()).unwrap_or_default(),
            ];
            if with_timing {
                rec.push(r.train_seconds.to_string());
                rec.push(r.predict_seconds.to_string());
            }
            rec.push(serde_plain_flag(r.flag).into());
            rec.push(r.error.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidData(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Aligned table with 3-decimal metrics and millisecond timings.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "{}", self.title);
        }
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>9} {:>7} {:>7} {:>7} {:>8} {:>10} {:>11}",
            "model", "accuracy", "precision", "recall", "f", "auc", "support", "train_s", "predict_s"
        );
        for r in &self.rows {
            let name = format!("{}{}", r.model, r.flag.marker());
            match (&r.metrics, &r.error) {
                (Some(m), _) => {
                    let _ = writeln!(
                        out,
                        "{:<10} {:>8.3} {:>9.3} {:>7.3} {:>7.3} {:>7} {:>8} {:>10.3} {:>11.3}",
                        name,
                        m.accuracy,
                        m.precision,
                        m.recall,
                        m.f_score,
                        m.auc.map(|a| format!("{a:.3}")).unwrap_or_else(|| "-".into()),
                        m.support,
                        r.train_seconds,
                        r.predict_seconds,
                    );
                }
                (None, e) => {
                    let _ = writeln!(out, "{:<10} error: {}", name, e.as_deref().unwrap_or("unknown"));
                }
            }
        }
        out
    }
}

pub(crate) fn serde_plain_flag(s: Significance) -> &'static str {
    match s {
        Significance::Best => "best",
        Significance::TopGroup => "top-group",
        Significance::Other => "other",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_arithmetic() {
        let cm = ConfusionMatrix { tp: 50, tn: 40, fp: 5, fn_: 5 };
        assert!((cm.accuracy().value - 0.9).abs() < 1e-15);
        assert_eq!(cm.accuracy().value + cm.error_rate().value, 1.0);
        let empty = ConfusionMatrix::default();
        assert!(empty.accuracy().degenerate);
        assert!(empty.f_score().degenerate);
    }

    #[test]
    fn auc_edge_cases() {
        assert_eq!(roc_auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.3, 0.4]).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&[0, 1, 0, 1], &[0.5; 4]).unwrap().auc, 0.5);
        assert!(roc_auc(&[1, 1], &[0.2, 0.3]).is_err());
    }

    #[test]
    fn cross_entropy_half() {
        let ce = cross_entropy(&[0, 1, 1], &[0.5, 0.5, 0.5]).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(cross_entropy(&[0, 1], &[0.0, 1.0]).unwrap() < 1e-11);
    }

    #[test]
    fn ttest_special_cases() {
        let a = [0.5, 0.6, 0.7];
        let t = paired_t_test(&a, &a).unwrap();
        assert_eq!((t.t, t.p, t.degenerate), (0.0, 1.0, false));
        let d = paired_t_test(&[2.0, 2.0, 2.0, 2.0], &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.p, 0.0);
    }

    #[test]
    fn split_sizes() {
        let s = train_test_split(2455, 0.25, 1).unwrap();
        assert_eq!(s.test.len(), 614);
        assert_eq!(s.train.len() + s.test.len(), 2455);
    }
}
