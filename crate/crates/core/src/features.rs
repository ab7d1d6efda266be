//! Continuous (min-max scaled) and trend (binarized) datasets with direction labels.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::{compute_all, IndicatorConfig, IndicatorTable, INDICATOR_COLUMNS};
use crate::marketdata::{AlignedTable, CandleSeries, Column, WindowPlan, WindowTag, CANDLE_COLUMNS, DATE_FORMAT};
use crate::matrix::Matrix;

/// How the binary direction target is derived from closes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMode {
    /// `y_t = 1` iff `return_t > return_{t-1}`, with `return_t = C_t / C_{t-1} - 1`.
    #[default]
    ReturnDelta,
    /// `y_t = 1` iff `C_t > C_{t-1}`.
    PriceDelta,
}

impl LabelMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            LabelMode::ReturnDelta => "return-delta",
            LabelMode::PriceDelta => "price-delta",
        }
    }
}

/// Direction labels aligned with `closes`; leading rows without enough history are `None`.
pub fn make_labels(closes: &[f64], mode: LabelMode) -> Result<Vec<Option<u8>>> {
    let need = match mode {
        LabelMode::ReturnDelta => 3,
        LabelMode::PriceDelta => 2,
    };
    if closes.len() < need {
        return Err(Error::InsufficientRows { window: "labels".into(), requested: need, available: closes.len() });
    }
    let mut out = vec![None; closes.len()];
    match mode {
        LabelMode::PriceDelta => {
            for t in 1..closes.len() {
                out[t] = Some(u8::from(closes[t] > closes[t - 1]));
            }
        }
        LabelMode::ReturnDelta => {
            let ret = |t: usize| closes[t] / closes[t - 1] - 1.0;
            for t in 2..closes.len() {
                out[t] = Some(u8::from(ret(t) > ret(t - 1)));
            }
        }
    }
    Ok(out)
}

/// Per-feature min/max captured on a fitting window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn fit_normalizer(x: &Matrix) -> Result<NormalizationParams> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::InvalidData("cannot fit a normalizer on an empty matrix".into()));
    }
    let mut min = vec![f64::INFINITY; x.cols()];
    let mut max = vec![f64::NEG_INFINITY; x.cols()];
    for row in x.iter_rows() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidData(format!("non-finite value in column {j}")));
            }
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(NormalizationParams { min, max })
}

/// `(x - min) / (max - min)` clamped to `[0, 1]`; constant columns map to 0.
pub fn apply_normalizer(params: &NormalizationParams, x: &Matrix) -> Result<Matrix> {
    x.check_cols(params.min.len())?;
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            let span = params.max[j] - params.min[j];
            *v = if span > 0.0 { ((*v - params.min[j]) / span).clamp(0.0, 1.0) } else { 0.0 };
        }
    }
    Ok(out)
}

/// Trend feature columns, in output order.
pub const TREND_COLUMNS: [&str; 12] =
    ["sma", "wma", "ema", "atr", "boll", "mom", "stoch_k", "stoch_d", "lw", "rsi", "macd", "adosc"];

fn bits_column(name: &str, n: usize, bit: impl Fn(usize) -> Option<bool>) -> Column {
    let values = (0..n)
        .map(|t| match bit(t) {
            Some(b) => f64::from(u8::from(b)),
            None => f64::NAN,
        })
        .collect();
    Column::from_values(name, values)
}

/// 1 iff the value rose against the previous day (equality gives 0).
pub fn rising_bits(col: &Column) -> Vec<Option<bool>> {
    (0..col.len())
        .map(|t| {
            if t == 0 {
                return None;
            }
            Some(col.get(t)? > col.get(t - 1)?)
        })
        .collect()
}

/// RSI trend bit: below 30 is up, above 70 is down, in between follows the
/// day-over-day change. Defined once the previous RSI exists.
pub fn rsi_bit(rsi: f64, prev: f64) -> bool {
    if rsi < 30.0 {
        true
    } else if rsi > 70.0 {
        false
    } else {
        rsi > prev
    }
}

/// Binarizes indicators and attention columns into up(1)/down(0) trend bits.
///
/// Every non-price column of `attention` is binarized with the rising rule.
pub fn binarize_trend(indicators: &IndicatorTable, attention: &AlignedTable, closes: &[f64]) -> Result<Vec<Column>> {
    let n = closes.len();
    let get = |name: &str| indicators.require(name);
    let mut out = Vec::new();
    for name in ["sma", "wma", "ema"] {
        let c = get(name)?;
        out.push(bits_column(name, n, |t| Some(c.get(t)? < closes[t])));
    }
    let rising = |name: &str, c: &Column| {
        let bits = rising_bits(c);
        bits_column(name, n, |t| bits[t])
    };
    out.push(rising("atr", get("atr")?));
    let (upper, lower) = (get("boll_upper")?, get("boll_lower")?);
    out.push(bits_column("boll", n, |t| {
        let (u, l) = (upper.get(t)?, lower.get(t)?);
        Some((closes[t] - l).abs() < (closes[t] - u).abs())
    }));
    let mom = get("mom")?;
    out.push(bits_column("mom", n, |t| Some(mom.get(t)? > 0.0)));
    for name in ["stoch_k", "stoch_d", "lw"] {
        out.push(rising(name, get(name)?));
    }
    let rsi = get("rsi")?;
    out.push(bits_column("rsi", n, |t| {
        if t == 0 {
            return None;
        }
        Some(rsi_bit(rsi.get(t)?, rsi.get(t - 1)?))
    }));
    for name in ["macd", "adosc"] {
        out.push(rising(name, get(name)?));
    }
    for col in attention.columns() {
        if CANDLE_COLUMNS.contains(&col.name.as_str()) {
            continue;
        }
        if col.len() != n {
            return Err(Error::LengthMismatch { left: col.len(), right: n });
        }
        out.push(rising(&col.name, col));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Continuous,
    Trend,
}

impl DatasetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetKind::Continuous => "continuous",
            DatasetKind::Trend => "trend",
        }
    }
}

impl std::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything needed to rebuild a dataset exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub kind: DatasetKind,
    pub window: WindowTag,
    pub label_mode: LabelMode,
    pub feature_names: Vec<String>,
    pub normalization: Option<NormalizationParams>,
    pub normalization_window: Option<WindowTag>,
    pub rows: usize,
    pub first_date: Option<NaiveDate>,
    pub last_date: Option<NaiveDate>,
    pub train_end: NaiveDate,
    pub lookback: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub dates: Vec<NaiveDate>,
    /// Feature rows immediately preceding the first row, oldest first. Used to
    /// build lookback windows for sequence models.
    pub history: Matrix,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn kind(&self) -> DatasetKind {
        self.manifest.kind
    }

    pub fn window(&self) -> WindowTag {
        self.manifest.window
    }

    pub fn feature_names(&self) -> &[String] {
        &self.manifest.feature_names
    }

    /// Row subset in the given order. History is dropped.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut manifest = self.manifest.clone();
        manifest.rows = idx.len();
        Dataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            dates: idx.iter().map(|&i| self.dates[i]).collect(),
            history: Matrix::zeros(0, self.features.cols()),
            manifest,
        }
    }

    /// Replaces every row with the concatenation of the `lookback` most recent
    /// feature rows (oldest first). Rows before the available history repeat
    /// the earliest row.
    pub fn lagged(&self, lookback: usize) -> Result<Dataset> {
        if lookback == 0 {
            return Err(Error::param("lookback", "must be at least 1"));
        }
        if lookback == 1 {
            return Ok(self.clone());
        }
        let p = self.features.cols();
        let h = self.history.rows();
        let total = h + self.features.rows();
        let full_row = |i: usize| -> &[f64] {
            if i < h {
                self.history.row(i)
            } else {
                self.features.row(i - h)
            }
        };
        let mut data = Vec::with_capacity(self.len() * p * lookback);
        for r in 0..self.len() {
            let pos = h + r;
            for lag in (0..lookback).rev() {
                let src = pos.saturating_sub(lag);
                debug_assert!(src < total);
                data.extend_from_slice(full_row(src));
            }
        }
        let mut manifest = self.manifest.clone();
        manifest.lookback = lookback;
        manifest.feature_names = (0..lookback)
            .rev()
            .flat_map(|lag| self.manifest.feature_names.iter().map(move |n| format!("{n}@t-{lag}")))
            .collect();
        Ok(Dataset {
            features: Matrix::new(self.len(), p * lookback, data)?,
            labels: self.labels.clone(),
            dates: self.dates.clone(),
            history: Matrix::zeros(0, p * lookback),
            manifest,
        })
    }

    /// Fraction of rows labeled 1.
    pub fn positive_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.iter().map(|&y| y as f64).sum::<f64>() / self.len() as f64
    }

    /// `Date,<features...>,label`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["Date".to_string()];
        header.extend(self.manifest.feature_names.iter().cloned());
        header.push("label".into());
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.dates[i].format(DATE_FORMAT).to_string()];
            rec.extend(self.features.row(i).iter().map(|v| v.to_string()));
            rec.push(self.labels[i].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }
}

/// Number of preceding rows kept on each dataset for lookback windows.
pub const HISTORY_ROWS: usize = 64;

/// Indicator, attention and label columns over the full calendar, from which
/// every dataset variant is sliced.
#[derive(Clone, Debug)]
pub struct FeatureFrame {
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
    indicators: IndicatorTable,
    attention: AlignedTable,
    labels: Vec<Option<u8>>,
    label_mode: LabelMode,
    plan: WindowPlan,
}

impl FeatureFrame {
    /// `table` must be the aligned candle table (candle dates, candle columns
    /// plus any attention columns).
    pub fn new(table: &AlignedTable, cfg: &IndicatorConfig, label_mode: LabelMode, plan: WindowPlan) -> Result<Self> {
        let candles = candles_from_table(table)?;
        let indicators = compute_all(&candles, cfg)?;
        let closes = candles.closes();
        let labels = make_labels(&closes, label_mode)?;
        Ok(Self { dates: candles.dates(), closes, indicators, attention: table.clone(), labels, label_mode, plan })
    }

    pub fn indicators(&self) -> &IndicatorTable {
        &self.indicators
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn plan(&self) -> &WindowPlan {
        &self.plan
    }

    pub fn label_mode(&self) -> LabelMode {
        self.label_mode
    }

    fn attention_columns(&self) -> impl Iterator<Item = &Column> {
        self.attention.columns().iter().filter(|c| !CANDLE_COLUMNS.contains(&c.name.as_str()))
    }

    /// Raw feature columns: the indicator set followed by attention columns.
    pub fn continuous_columns(&self) -> Vec<Column> {
        let mut cols: Vec<Column> =
            INDICATOR_COLUMNS.iter().map(|n| self.indicators.column(n).unwrap().clone()).collect();
        cols.extend(self.attention_columns().cloned());
        cols
    }

    pub fn trend_columns(&self) -> Result<Vec<Column>> {
        binarize_trend(&self.indicators, &self.attention, &self.closes)
    }

    pub fn columns(&self, kind: DatasetKind) -> Result<Vec<Column>> {
        match kind {
            DatasetKind::Continuous => Ok(self.continuous_columns()),
            DatasetKind::Trend => self.trend_columns(),
        }
    }

    /// Calendar rows where every feature of `kind` and the label are defined.
    fn valid_rows(&self, cols: &[Column]) -> Vec<usize> {
        (0..self.dates.len()).filter(|&t| self.labels[t].is_some() && cols.iter().all(|c| !c.gaps[t])).collect()
    }

    /// Builds `window` of `kind`. Continuous features are scaled with
    /// parameters fitted on `fit_on` (a training window) and clamped elsewhere.
    pub fn build_dataset(&self, kind: DatasetKind, window: WindowTag, fit_on: WindowTag) -> Result<Dataset> {
        if !fit_on.is_training() {
            return Err(Error::param("fit_on", "normalization must be fitted on a training window"));
        }
        let cols = self.columns(kind)?;
        let rows = self.valid_rows(&cols);
        if rows.is_empty() {
            return Err(Error::InvalidData("no rows left after dropping warm-up".into()));
        }
        let valid_dates: Vec<NaiveDate> = rows.iter().map(|&t| self.dates[t]).collect();
        let range = self.plan.range(&valid_dates, window)?;
        let hist_start = range.start.saturating_sub(HISTORY_ROWS);

        let matrix_for = |r: std::ops::Range<usize>| -> Matrix {
            let mut data = Vec::with_capacity(r.len() * cols.len());
            for &t in &rows[r.clone()] {
                data.extend(cols.iter().map(|c| c.values[t]));
            }
            Matrix::new(r.len(), cols.len(), data).unwrap()
        };
        let mut features = matrix_for(range.clone());
        let mut history = matrix_for(hist_start..range.start);

        let normalization = match kind {
            DatasetKind::Continuous => {
                let fit_range = self.plan.range(&valid_dates, fit_on)?;
                let params = fit_normalizer(&matrix_for(fit_range))?;
                features = apply_normalizer(&params, &features)?;
                history = apply_normalizer(&params, &history)?;
                Some(params)
            }
            DatasetKind::Trend => None,
        };

        let dates: Vec<NaiveDate> = valid_dates[range.clone()].to_vec();
        let labels: Vec<u8> = rows[range.clone()].iter().map(|&t| self.labels[t].unwrap()).collect();
        let manifest = DatasetManifest {
            kind,
            window,
            label_mode: self.label_mode,
            feature_names: cols.iter().map(|c| c.name.clone()).collect(),
            normalization_window: normalization.as_ref().map(|_| fit_on),
            normalization,
            rows: labels.len(),
            first_date: dates.first().copied(),
            last_date: dates.last().copied(),
            train_end: self.plan.train_end,
            lookback: 1,
        };
        Ok(Dataset { features, labels, dates, history, manifest })
    }
}

/// Recovers the candle series from the price columns of an aligned table.
pub fn candles_from_table(table: &AlignedTable) -> Result<CandleSeries> {
    let col = |n: &str| table.require(n).map(|c| c.values.clone());
    let (o, h, l, c, v) = (col("open")?, col("high")?, col("low")?, col("close")?, col("volume")?);
    let candles = table
        .dates()
        .iter()
        .enumerate()
        .map(|(i, &date)| crate::marketdata::Candle {
            date,
            open: o[i],
            high: h[i],
            low: l[i],
            close: c[i],
            volume: v[i],
        })
        .collect();
    CandleSeries::new(candles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn return_delta_labels() {
        let l = make_labels(&[100.0, 101.0, 103.0], LabelMode::ReturnDelta).unwrap();
        assert_eq!(l, vec![None, None, Some(1)]);
        let flat = make_labels(&[5.0; 6], LabelMode::ReturnDelta).unwrap();
        assert!(flat[2..].iter().all(|&y| y == Some(0)));
        let flat = make_labels(&[5.0; 6], LabelMode::PriceDelta).unwrap();
        assert!(flat[1..].iter().all(|&y| y == Some(0)));
        assert_eq!(make_labels(&[100.0, 110.0], LabelMode::PriceDelta).unwrap()[1], Some(1));
        assert!(make_labels(&[100.0, 110.0], LabelMode::ReturnDelta).is_err());
    }

    #[test]
    fn normalizer_cases() {
        let x = Matrix::from_rows(&[[2.0, 7.0], [4.0, 7.0], [6.0, 7.0]]).unwrap();
        let p = fit_normalizer(&x).unwrap();
        assert_eq!((p.min[0], p.max[0]), (2.0, 6.0));
        assert_eq!((p.min[1], p.max[1]), (7.0, 7.0));
        let z = apply_normalizer(&p, &x).unwrap();
        assert_eq!(z.column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(z.column(1), vec![0.0, 0.0, 0.0]);
        let v = Matrix::from_rows(&[[8.0, 7.0]]).unwrap();
        assert_eq!(apply_normalizer(&p, &v).unwrap().get(0, 0), 1.0);
        let wrong = Matrix::from_rows(&[[1.0]]).unwrap();
        assert!(apply_normalizer(&p, &wrong).is_err());
        assert!(fit_normalizer(&Matrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn rsi_bit_rules() {
        assert!(rsi_bit(25.0, 40.0));
        assert!(!rsi_bit(75.0, 60.0));
        assert!(rsi_bit(50.0, 45.0));
        assert!(!rsi_bit(50.0, 50.0));
    }

    #[test]
    fn rising_ties_are_zero() {
        let c = Column::from_values("x", vec![1.0, 2.0, 2.0, 1.0]);
        assert_eq!(rising_bits(&c), vec![None, Some(true), Some(false), Some(false)]);
    }
}
