//! Classifier families behind one fit/predict interface.
//!
//! Each family reads typed hyperparameters out of a [`ModelSpec`] (a named
//! value map) and fits on a feature matrix with binary labels. Sequence models
//! consume lookback windows, so dataset-level entry points ([`fit`],
//! [`TrainedModel::predict`]) reshape rows through [`prepare`] first.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::timeit;
use crate::features::{Dataset, DatasetManifest};
use crate::matrix::Matrix;

pub mod ann;
pub mod forest;
pub mod gbt;
pub mod grid;
pub mod knn;
pub mod lstm;
pub mod nb;
pub mod nn;
pub mod svm;
pub mod tree;

pub use grid::{grid_search, Grid, GridResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Knn,
    Nb,
    Rf,
    Gbt,
    Svm,
    Ann,
    Lstm,
}

impl Family {
    pub const ALL: [Family; 7] =
        [Family::Knn, Family::Nb, Family::Rf, Family::Gbt, Family::Svm, Family::Ann, Family::Lstm];

    /// Column order of the comparison tables.
    pub const TABLE_ORDER: [Family; 7] =
        [Family::Rf, Family::Knn, Family::Gbt, Family::Svm, Family::Nb, Family::Ann, Family::Lstm];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Knn => "knn",
            Family::Nb => "nb",
            Family::Rf => "rf",
            Family::Gbt => "gbt",
            Family::Svm => "svm",
            Family::Ann => "ann",
            Family::Lstm => "lstm",
        }
    }

    pub fn display_name(&self) -> &'static str {
        match self {
            Family::Knn => "KNN",
            Family::Nb => "NB",
            Family::Rf => "RF",
            Family::Gbt => "XGBoost",
            Family::Svm => "SVM",
            Family::Ann => "ANN",
            Family::Lstm => "LSTM",
        }
    }

    /// Hyperparameter names each family accepts.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Family::Knn => knn::PARAMS,
            Family::Nb => nb::PARAMS,
            Family::Rf => forest::PARAMS,
            Family::Gbt => gbt::PARAMS,
            Family::Svm => svm::PARAMS,
            Family::Ann => ann::PARAMS,
            Family::Lstm => lstm::PARAMS,
        }
    }

    pub fn valid_names() -> String {
        Family::ALL.iter().map(Family::as_str).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown family {s:?}; valid families: {}", Family::valid_names())))
    }
}

/// One hyperparameter value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Float(f) => Some(f),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            ParamValue::Bool(_) => 0,
            ParamValue::Int(_) | ParamValue::Float(_) => 1,
            ParamValue::Str(_) => 2,
        }
    }

    /// Total order used for deterministic tie-breaking: numbers by value,
    /// strings lexicographically.
    pub fn total_cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match (self, other) {
            (ParamValue::Bool(a), ParamValue::Bool(b)) => a.cmp(b),
            (ParamValue::Str(a), ParamValue::Str(b)) => a.cmp(b),
            _ => match (self.as_f64(), other.as_f64()) {
                (Some(a), Some(b)) => a.total_cmp(&b),
                _ => self.rank().cmp(&other.rank()).then(Ordering::Equal),
            },
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}

/// A classifier family plus hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        Self { family, params: BTreeMap::new() }
    }

    pub fn with(mut self, name: &str, value: impl Into<ParamValue>) -> Self {
        self.params.insert(name.to_string(), value.into());
        self
    }

    /// Rejects names the family does not know.
    pub fn validate_names(&self) -> Result<()> {
        let allowed = self.family.param_names();
        for name in self.params.keys() {
            if !allowed.contains(&name.as_str()) {
                return Err(Error::param(
                    name,
                    format!("not a {} parameter (expected one of: {})", self.family, allowed.join(", ")),
                ));
            }
        }
        Ok(())
    }

    /// Full validation: names plus typed parsing of every value.
    pub fn validate(&self) -> Result<()> {
        self.validate_names()?;
        match self.family {
            Family::Knn => knn::KnnParams::from_spec(self).map(drop),
            Family::Nb => nb::NbParams::from_spec(self).map(drop),
            Family::Rf => forest::ForestParams::from_spec(self).map(drop),
            Family::Gbt => gbt::GbtParams::from_spec(self).map(drop),
            Family::Svm => svm::SvmParams::from_spec(self).map(drop),
            Family::Ann => ann::AnnParams::from_spec(self).map(drop),
            Family::Lstm => lstm::LstmParams::from_spec(self).map(drop),
        }
    }

    /// Stable `name=value;...` rendering.
    pub fn key(&self) -> String {
        let body: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", self.family, body.join(";"))
    }

    /// Lexicographic comparison over (name, value) pairs.
    pub fn params_cmp(&self, other: &Self) -> std::cmp::Ordering {
        let mut a = self.params.iter();
        let mut b = other.params.iter();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return std::cmp::Ordering::Equal,
                (None, Some(_)) => return std::cmp::Ordering::Less,
                (Some(_), None) => return std::cmp::Ordering::Greater,
                (Some((ka, va)), Some((kb, vb))) => {
                    let o = ka.cmp(kb).then_with(|| va.total_cmp(vb));
                    if o.is_ne() {
                        return o;
                    }
                }
            }
        }
    }

    fn raw(&self, name: &str) -> Option<&ParamValue> {
        self.params.get(name)
    }

    pub fn f64_or(&self, name: &str, default: f64) -> Result<f64> {
        match self.raw(name) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| Error::param(name, format!("expected a number, got {v}"))),
        }
    }

    pub fn usize_or(&self, name: &str, default: usize) -> Result<usize> {
        match self.raw(name) {
            None => Ok(default),
            Some(ParamValue::Int(i)) if *i >= 0 => Ok(*i as usize),
            Some(ParamValue::Float(f)) if *f >= 0.0 && f.fract() == 0.0 => Ok(*f as usize),
            Some(v) => Err(Error::param(name, format!("expected a non-negative integer, got {v}"))),
        }
    }

    /// Integer parameter where the string `"none"` (or absence) means unbounded.
    pub fn opt_usize(&self, name: &str) -> Result<Option<usize>> {
        match self.raw(name) {
            None => Ok(None),
            Some(ParamValue::Str(s)) if s.eq_ignore_ascii_case("none") => Ok(None),
            Some(_) => self.usize_or(name, 0).map(Some),
        }
    }

    pub fn str_or<'a>(&'a self, name: &str, default: &'a str) -> Result<&'a str> {
        match self.raw(name) {
            None => Ok(default),
            Some(ParamValue::Str(s)) => Ok(s),
            Some(v) => Err(Error::param(name, format!("expected a string, got {v}"))),
        }
    }

    pub fn bool_or(&self, name: &str, default: bool) -> Result<bool> {
        match self.raw(name) {
            None => Ok(default),
            Some(ParamValue::Bool(b)) => Ok(*b),
            Some(v) => Err(Error::param(name, format!("expected a boolean, got {v}"))),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// One prediction: a hard label and a ranking score (probability of class 1,
/// or the signed margin for SVM).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: u8,
    pub score: f64,
}

impl Prediction {
    pub fn from_probability(p: f64) -> Self {
        Prediction { label: u8::from(p > 0.5), score: p }
    }
}

/// Family-specific fitted parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FittedState {
    Knn(knn::Knn),
    Nb(nb::NaiveBayes),
    Rf(forest::RandomForest),
    Gbt(gbt::Gbt),
    Svm(svm::Svm),
    Ann(ann::Mlp),
    Lstm(lstm::Lstm),
}

impl FittedState {
    pub fn n_features(&self) -> usize {
        match self {
            FittedState::Knn(m) => m.n_features(),
            FittedState::Nb(m) => m.n_features(),
            FittedState::Rf(m) => m.n_features(),
            FittedState::Gbt(m) => m.n_features(),
            FittedState::Svm(m) => m.n_features(),
            FittedState::Ann(m) => m.n_features(),
            FittedState::Lstm(m) => m.n_features(),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<Prediction>> {
        x.check_cols(self.n_features())?;
        Ok(match self {
            FittedState::Knn(m) => m.predict(x),
            FittedState::Nb(m) => m.predict(x),
            FittedState::Rf(m) => m.predict(x),
            FittedState::Gbt(m) => m.predict(x),
            FittedState::Svm(m) => m.predict(x),
            FittedState::Ann(m) => m.predict(x),
            FittedState::Lstm(m) => m.predict(x),
        })
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub train_seconds: f64,
    pub rows: usize,
    pub seed: u64,
    pub warnings: Vec<String>,
    pub dataset: Option<DatasetManifest>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub state: FittedState,
    pub meta: TrainingMeta,
}

pub const MODEL_FORMAT: &str = "trendlab-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: TrainedModel,
}

impl TrainedModel {
    /// Predicts on rows that already match the training layout.
    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<Prediction>> {
        self.state.predict(x)
    }

    /// Predicts on a dataset, applying the same input preparation as training.
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<Prediction>> {
        let prepared = prepare(&self.spec, ds)?;
        self.predict_matrix(&prepared.features)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile { format: MODEL_FORMAT.into(), version: MODEL_FORMAT_VERSION, model: self.clone() };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidData(format!("unsupported model file {} v{}", file.format, file.version)));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Reshapes dataset rows into the input layout the family expects. Only the
/// sequence model changes anything: rows become lookback windows.
pub fn prepare<'a>(spec: &ModelSpec, ds: &'a Dataset) -> Result<Cow<'a, Dataset>> {
    match spec.family {
        Family::Lstm => {
            let lookback = lstm::LstmParams::from_spec(spec)?.lookback;
            if lookback >= ds.len() + ds.history.rows() {
                return Err(Error::param(
                    "lookback",
                    format!("{lookback} is not below the available {} rows", ds.len() + ds.history.rows()),
                ));
            }
            Ok(Cow::Owned(ds.lagged(lookback)?))
        }
        _ => Ok(Cow::Borrowed(ds)),
    }
}

pub(crate) fn check_xy(x: &Matrix, y: &[u8]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch { left: x.rows(), right: y.len() });
    }
    if x.rows() == 0 {
        return Err(Error::InvalidData("empty training set".into()));
    }
    if x.cols() == 0 {
        return Err(Error::InvalidData("zero-length feature vectors".into()));
    }
    if let Some(bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidData(format!("labels must be 0 or 1, found {bad}")));
    }
    Ok(())
}

/// Fits on prepared rows. Returns the state and any non-fatal warnings.
pub fn fit_matrix(spec: &ModelSpec, x: &Matrix, y: &[u8], seed: u64) -> Result<(FittedState, Vec<String>)> {
    spec.validate_names()?;
    check_xy(x, y)?;
    let mut warnings = Vec::new();
    let state = match spec.family {
        Family::Knn => FittedState::Knn(knn::Knn::fit(x, y, &knn::KnnParams::from_spec(spec)?)?),
        Family::Nb => FittedState::Nb(nb::NaiveBayes::fit(x, y, &nb::NbParams::from_spec(spec)?)?),
        Family::Rf => FittedState::Rf(forest::RandomForest::fit(x, y, &forest::ForestParams::from_spec(spec)?, seed)?),
        Family::Gbt => FittedState::Gbt(gbt::Gbt::fit(x, y, &gbt::GbtParams::from_spec(spec)?)?),
        Family::Svm => FittedState::Svm(svm::Svm::fit(x, y, &svm::SvmParams::from_spec(spec)?)?),
        Family::Ann => {
            let p = ann::AnnParams::from_spec(spec)?;
            warnings.extend(p.grid_warnings());
            FittedState::Ann(ann::Mlp::fit(x, y, &p, seed)?)
        }
        Family::Lstm => {
            let p = lstm::LstmParams::from_spec(spec)?;
            warnings.extend(p.grid_warnings());
            FittedState::Lstm(lstm::Lstm::fit(x, y, &p, seed)?)
        }
    };
    Ok((state, warnings))
}

/// Fits `spec` on a dataset and records training time.
pub fn fit(spec: &ModelSpec, ds: &Dataset, seed: u64) -> Result<TrainedModel> {
    let prepared = prepare(spec, ds)?;
    let (result, secs) = timeit(|| fit_matrix(spec, &prepared.features, &prepared.labels, seed));
    let (state, warnings) = result?;
    Ok(TrainedModel {
        spec: spec.clone(),
        state,
        meta: TrainingMeta { train_seconds: secs, rows: ds.len(), seed, warnings, dataset: Some(ds.manifest.clone()) },
    })
}

/// Deterministic 64-bit seed mixing (splitmix64 finalizer).
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_parse_lists_valid_names() {
        let err = "xgb".parse::<Family>().unwrap_err().to_string();
        assert!(err.contains("knn, nb, rf, gbt, svm, ann, lstm"), "{err}");
        assert_eq!("SVM".parse::<Family>().unwrap(), Family::Svm);
    }

    #[test]
    fn unknown_param_rejected() {
        let spec = ModelSpec::new(Family::Knn).with("depth", 3i64);
        assert!(spec.validate().is_err());
        assert!(ModelSpec::new(Family::Knn).with("k", 3i64).validate().is_ok());
    }

    #[test]
    fn params_order_is_numeric() {
        let a = ModelSpec::new(Family::Knn).with("k", 3i64);
        let b = ModelSpec::new(Family::Knn).with("k", 10i64);
        assert!(a.params_cmp(&b).is_lt());
    }
}
