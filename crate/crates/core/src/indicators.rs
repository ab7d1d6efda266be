//! Technical indicators over daily bars.
//!
//! Every function returns a vector aligned with its input where the leading
//! warm-up cells are NaN. Windowed indicators are computed in streaming form
//! (running sums, monotone deques, recursive smoothing).

use std::collections::VecDeque;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::{write_columns_csv, CandleSeries, Column};

/// Column-wise view of a bar series.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bars {
    pub high: Vec<f64>,
    pub low: Vec<f64>,
    pub close: Vec<f64>,
    pub volume: Vec<f64>,
}

impl Bars {
    pub fn len(&self) -> usize {
        self.close.len()
    }

    pub fn is_empty(&self) -> bool {
        self.close.is_empty()
    }
}

impl From<&CandleSeries> for Bars {
    fn from(c: &CandleSeries) -> Self {
        Bars { high: c.highs(), low: c.lows(), close: c.closes(), volume: c.volumes() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentumForm {
    /// `C_t - C_{t-n}`; can be negative.
    #[default]
    Difference,
    /// `C_t / C_{t-n} * 100`.
    Ratio,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndicatorConfig {
    pub sma_n: usize,
    pub wma_n: usize,
    pub ema_n: usize,
    pub rsi_n: usize,
    pub stoch_n: usize,
    pub stoch_d_n: usize,
    pub atr_n: usize,
    pub mom_n: usize,
    pub momentum_form: MomentumForm,
    pub lw_n: usize,
    pub boll_n: usize,
    pub boll_k: f64,
    pub macd_fast: usize,
    pub macd_slow: usize,
    pub macd_signal: usize,
    pub adosc_fast: usize,
    pub adosc_slow: usize,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        Self {
            sma_n: 14,
            wma_n: 14,
            ema_n: 14,
            rsi_n: 14,
            stoch_n: 14,
            stoch_d_n: 3,
            atr_n: 14,
            mom_n: 10,
            momentum_form: MomentumForm::Difference,
            lw_n: 14,
            boll_n: 20,
            boll_k: 2.0,
            macd_fast: 12,
            macd_slow: 26,
            macd_signal: 9,
            adosc_fast: 3,
            adosc_slow: 10,
        }
    }
}

impl IndicatorConfig {
    pub fn validate(&self) -> Result<()> {
        let periods = [
            ("sma_n", self.sma_n),
            ("wma_n", self.wma_n),
            ("ema_n", self.ema_n),
            ("rsi_n", self.rsi_n),
            ("stoch_n", self.stoch_n),
            ("stoch_d_n", self.stoch_d_n),
            ("atr_n", self.atr_n),
            ("mom_n", self.mom_n),
            ("lw_n", self.lw_n),
            ("boll_n", self.boll_n),
            ("macd_fast", self.macd_fast),
            ("macd_slow", self.macd_slow),
            ("macd_signal", self.macd_signal),
            ("adosc_fast", self.adosc_fast),
            ("adosc_slow", self.adosc_slow),
        ];
        for (name, p) in periods {
            check_period(name, p)?;
        }
        if self.boll_n < 2 {
            return Err(Error::param("boll_n", "must be at least 2"));
        }
        if !(self.boll_k > 0.0) {
            return Err(Error::param("boll_k", "must be positive"));
        }
        if self.macd_fast >= self.macd_slow {
            return Err(Error::param("macd_fast", "must be below macd_slow"));
        }
        if self.adosc_fast >= self.adosc_slow {
            return Err(Error::param("adosc_fast", "must be below adosc_slow"));
        }
        Ok(())
    }

    /// Longest warm-up over all indicators.
    pub fn max_warmup(&self) -> usize {
        [
            self.sma_n - 1,
            self.wma_n - 1,
            self.ema_n - 1,
            self.rsi_n - 1,
            self.stoch_n + self.stoch_d_n - 2,
            self.atr_n,
            self.mom_n,
            self.lw_n - 1,
            self.boll_n - 1,
            self.macd_slow + self.macd_signal - 2,
            self.adosc_slow - 1,
        ]
        .into_iter()
        .max()
        .unwrap()
    }
}

fn check_period(name: &str, n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::param(name, "period must be at least 1"));
    }
    Ok(())
}

fn check_len(name: &str, have: usize, need: usize) -> Result<()> {
    if have < need {
        return Err(Error::InsufficientRows { window: name.to_string(), requested: need, available: have });
    }
    Ok(())
}

fn nan_vec(n: usize) -> Vec<f64> {
    vec![f64::NAN; n]
}

pub fn sma(values: &[f64], n: usize) -> Result<Vec<f64>> {
    check_period("sma", n)?;
    check_len("sma", values.len(), n)?;
    let mut out = nan_vec(values.len());
    let mut sum: f64 = values[..n].iter().sum();
    out[n - 1] = sum / n as f64;
    for t in n..values.len() {
        sum += values[t] - values[t - n];
        out[t] = sum / n as f64;
    }
    Ok(out)
}

/// Linearly weighted average, weights `1..=n` with the newest bar weighted `n`.
pub fn wma(values: &[f64], n: usize) -> Result<Vec<f64>> {
    check_period("wma", n)?;
    check_len("wma", values.len(), n)?;
    let denom = (n * (n + 1)) as f64 / 2.0;
    let mut out = nan_vec(values.len());
    let mut plain: f64 = values[..n].iter().sum();
    let mut weighted: f64 = values[..n].iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
    out[n - 1] = weighted / denom;
    for t in n..values.len() {
        weighted += n as f64 * values[t] - plain;
        plain += values[t] - values[t - n];
        out[t] = weighted / denom;
    }
    Ok(out)
}

/// Exponential average with `k = 2 / (n + 1)`, seeded by the simple mean of the
/// first `n` defined values. Leading NaN input cells are skipped.
pub fn ema(values: &[f64], n: usize) -> Result<Vec<f64>> {
    check_period("ema", n)?;
    let start = values.iter().position(|v| v.is_finite()).unwrap_or(values.len());
    check_len("ema", values.len() - start, n)?;
    let k = 2.0 / (n as f64 + 1.0);
    let mut out = nan_vec(values.len());
    let seed_at = start + n - 1;
    let mut prev = values[start..=seed_at].iter().sum::<f64>() / n as f64;
    out[seed_at] = prev;
    for t in seed_at + 1..values.len() {
        prev = values[t] * k + prev * (1.0 - k);
        out[t] = prev;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MovingAverages {
    pub sma: Vec<f64>,
    pub wma: Vec<f64>,
    pub ema: Vec<f64>,
}

pub fn moving_averages(closes: &[f64], cfg: &IndicatorConfig) -> Result<MovingAverages> {
    Ok(MovingAverages { sma: sma(closes, cfg.sma_n)?, wma: wma(closes, cfg.wma_n)?, ema: ema(closes, cfg.ema_n)? })
}

/// Relative strength index.
///
/// Average gain/loss is seeded with the simple mean of the `n - 1` changes
/// inside the first `n` closes, then Wilder-smoothed:
/// `avg_t = (avg_{t-1} * (n - 1) + x_t) / n`. The first value lands on index
/// `n - 1`. A zero average loss gives 100, a zero average gain gives 0, and a
/// window with no movement at all gives 50.
pub fn rsi(closes: &[f64], n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::param("rsi_n", "period must be at least 2"));
    }
    check_len("rsi", closes.len(), n)?;
    let mut out = nan_vec(closes.len());
    let change = |t: usize| closes[t] - closes[t - 1];
    let (mut gain, mut loss) = (1..n).fold((0.0, 0.0), |(g, l), t| {
        let c = change(t);
        (g + c.max(0.0), l + (-c).max(0.0))
    });
    gain /= (n - 1) as f64;
    loss /= (n - 1) as f64;
    out[n - 1] = rsi_value(gain, loss);
    let nf = n as f64;
    for t in n..closes.len() {
        let c = change(t);
        gain = (gain * (nf - 1.0) + c.max(0.0)) / nf;
        loss = (loss * (nf - 1.0) + (-c).max(0.0)) / nf;
        out[t] = rsi_value(gain, loss);
    }
    Ok(out)
}

fn rsi_value(gain: f64, loss: f64) -> f64 {
    if loss == 0.0 && gain == 0.0 {
        50.0
    } else if loss == 0.0 {
        100.0
    } else if gain == 0.0 {
        0.0
    } else {
        100.0 - 100.0 / (1.0 + gain / loss)
    }
}

/// Trailing `n`-bar max of `high` and min of `low`, via monotone deques.
fn rolling_extremes(high: &[f64], low: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let len = high.len();
    let mut hh = nan_vec(len);
    let mut ll = nan_vec(len);
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    for t in 0..len {
        while maxq.back().is_some_and(|&i| high[i] <= high[t]) {
            maxq.pop_back();
        }
        maxq.push_back(t);
        while minq.back().is_some_and(|&i| low[i] >= low[t]) {
            minq.pop_back();
        }
        minq.push_back(t);
        if t + 1 >= n {
            let lo = t + 1 - n;
            while maxq.front().is_some_and(|&i| i < lo) {
                maxq.pop_front();
            }
            while minq.front().is_some_and(|&i| i < lo) {
                minq.pop_front();
            }
            hh[t] = high[maxq[0]];
            ll[t] = low[minq[0]];
        }
    }
    (hh, ll)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stochastics {
    pub k: Vec<f64>,
    pub d: Vec<f64>,
}

/// %K over the trailing `n` bars and %D as the `d`-bar simple mean of %K.
/// A flat window (`H_n = L_n`) gives %K = 50.
pub fn stochastics(bars: &Bars, n: usize, d: usize) -> Result<Stochastics> {
    check_period("stoch_n", n)?;
    check_period("stoch_d_n", d)?;
    check_len("stochastics", bars.len(), n + d - 1)?;
    let (hh, ll) = rolling_extremes(&bars.high, &bars.low, n);
    let mut k = nan_vec(bars.len());
    for t in n - 1..bars.len() {
        let range = hh[t] - ll[t];
        k[t] = if range > 0.0 { ((bars.close[t] - ll[t]) / range * 100.0).clamp(0.0, 100.0) } else { 50.0 };
    }
    let d_line = sma(&k[n - 1..], d)?;
    let mut dv = nan_vec(n - 1);
    dv.extend(d_line);
    Ok(Stochastics { k, d: dv })
}

/// Williams %R on the negative scale: `-(H_n - C_t) / (H_n - L_n) * 100`.
pub fn larry_williams(bars: &Bars, n: usize) -> Result<Vec<f64>> {
    check_period("lw_n", n)?;
    check_len("larry_williams", bars.len(), n)?;
    let (hh, ll) = rolling_extremes(&bars.high, &bars.low, n);
    let mut out = nan_vec(bars.len());
    for t in n - 1..bars.len() {
        let range = hh[t] - ll[t];
        out[t] = if range > 0.0 { (-(hh[t] - bars.close[t]) / range * 100.0).clamp(-100.0, 0.0) } else { -50.0 };
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bollinger {
    pub upper: Vec<f64>,
    pub middle: Vec<f64>,
    pub lower: Vec<f64>,
}

/// Bands at `k` population standard deviations around the `n`-bar mean.
pub fn bollinger(closes: &[f64], n: usize, k: f64) -> Result<Bollinger> {
    if n < 2 {
        return Err(Error::param("boll_n", "period must be at least 2"));
    }
    if !(k >= 0.0) {
        return Err(Error::param("boll_k", "must be non-negative"));
    }
    let middle = sma(closes, n)?;
    let mut upper = nan_vec(closes.len());
    let mut lower = nan_vec(closes.len());
    for t in n - 1..closes.len() {
        let m = middle[t];
        let var = closes[t + 1 - n..=t].iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        upper[t] = m + k * sd;
        lower[t] = m - k * sd;
    }
    Ok(Bollinger { upper, middle, lower })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Macd {
    pub line: Vec<f64>,
    pub signal: Vec<f64>,
}

/// MACD line (`EMA_fast - EMA_slow`) and its signal EMA. Both columns share
/// the warm-up of the signal line, `slow + signal - 2`.
pub fn macd(closes: &[f64], fast: usize, slow: usize, signal: usize) -> Result<Macd> {
    check_period("macd_fast", fast)?;
    check_period("macd_signal", signal)?;
    if fast >= slow {
        return Err(Error::param("macd_fast", "must be below macd_slow"));
    }
    check_len("macd", closes.len(), slow + signal)?;
    let ef = ema(closes, fast)?;
    let es = ema(closes, slow)?;
    let mut line: Vec<f64> = ef.iter().zip(&es).map(|(a, b)| a - b).collect();
    let mut sig = ema(&line, signal)?;
    let warm = slow + signal - 2;
    for t in 0..warm {
        line[t] = f64::NAN;
        sig[t] = f64::NAN;
    }
    Ok(Macd { line, signal: sig })
}

/// True range; index 0 has no previous close and is NaN.
pub fn true_range(bars: &Bars) -> Vec<f64> {
    let mut tr = nan_vec(bars.len());
    for t in 1..bars.len() {
        let pc = bars.close[t - 1];
        tr[t] = (bars.high[t] - bars.low[t]).max((bars.high[t] - pc).abs()).max((bars.low[t] - pc).abs());
    }
    tr
}

/// Wilder-smoothed average true range, seeded by the mean of the first `n`
/// true ranges. First value at index `n`.
pub fn atr(bars: &Bars, n: usize) -> Result<Vec<f64>> {
    check_period("atr_n", n)?;
    check_len("atr", bars.len(), n + 1)?;
    let tr = true_range(bars);
    let mut out = nan_vec(bars.len());
    let mut prev = tr[1..=n].iter().sum::<f64>() / n as f64;
    out[n] = prev;
    let nf = n as f64;
    for t in n + 1..bars.len() {
        prev = (prev * (nf - 1.0) + tr[t]) / nf;
        out[t] = prev;
    }
    Ok(out)
}

pub fn momentum(closes: &[f64], n: usize, form: MomentumForm) -> Result<Vec<f64>> {
    check_period("mom_n", n)?;
    check_len("momentum", closes.len(), n + 1)?;
    let mut out = nan_vec(closes.len());
    for t in n..closes.len() {
        out[t] = match form {
            MomentumForm::Difference => closes[t] - closes[t - n],
            MomentumForm::Ratio => closes[t] / closes[t - n] * 100.0,
        };
    }
    Ok(out)
}

/// Close-location value `((C - L) - (H - C)) / (H - L)`, zero on flat bars.
pub fn close_location(high: f64, low: f64, close: f64) -> f64 {
    let range = high - low;
    if range > 0.0 {
        ((close - low) - (high - close)) / range
    } else {
        0.0
    }
}

/// Cumulative accumulation/distribution line.
pub fn ad_line(bars: &Bars) -> Vec<f64> {
    let mut acc = 0.0;
    (0..bars.len())
        .map(|t| {
            acc += close_location(bars.high[t], bars.low[t], bars.close[t]) * bars.volume[t];
            acc
        })
        .collect()
}

/// Chaikin oscillator: `EMA_fast(AD) - EMA_slow(AD)`, warm-up `slow - 1`.
pub fn adosc(bars: &Bars, fast: usize, slow: usize) -> Result<Vec<f64>> {
    check_period("adosc_fast", fast)?;
    if fast >= slow {
        return Err(Error::param("adosc_fast", "must be below adosc_slow"));
    }
    check_len("adosc", bars.len(), slow)?;
    let ad = ad_line(bars);
    let ef = ema(&ad, fast)?;
    let es = ema(&ad, slow)?;
    Ok(ef.iter().zip(&es).map(|(a, b)| a - b).collect())
}

/// Indicator column names in table order.
pub const INDICATOR_COLUMNS: [&str; 15] = [
    "sma",
    "wma",
    "ema",
    "atr",
    "mom",
    "stoch_k",
    "stoch_d",
    "boll_upper",
    "boll_middle",
    "boll_lower",
    "rsi",
    "lw",
    "adosc",
    "macd",
    "macd_signal",
];

/// All indicators aligned with the candle dates.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorTable {
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<Column>,
}

impl IndicatorTable {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Column> {
        self.column(name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// `(name, leading gap count)` for every column.
    pub fn warmups(&self) -> Vec<(String, usize)> {
        self.columns.iter().map(|c| (c.name.clone(), c.warmup())).collect()
    }

    pub fn warmup(&self, name: &str) -> Option<usize> {
        self.column(name).map(Column::warmup)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_columns_csv(w, &self.dates, &self.columns)
    }
}

enum Group {
    Averages,
    Atr,
    Momentum,
    Stoch,
    Boll,
    Rsi,
    Lw,
    Adosc,
    Macd,
}

const GROUPS: [Group; 9] = [
    Group::Averages,
    Group::Atr,
    Group::Momentum,
    Group::Stoch,
    Group::Boll,
    Group::Rsi,
    Group::Lw,
    Group::Adosc,
    Group::Macd,
];

/// Computes every indicator. Indicator groups are evaluated in parallel.
pub fn compute_all(candles: &CandleSeries, cfg: &IndicatorConfig) -> Result<IndicatorTable> {
    cfg.validate()?;
    check_len("indicators", candles.len(), cfg.max_warmup() + 1)?;
    let bars = Bars::from(candles);
    let close = &bars.close;
    type Named = Vec<(&'static str, Vec<f64>)>;
    let groups: Vec<Result<Named>> = crate::par::map_slice(&GROUPS, |g| -> Result<Named> {
        Ok(match g {
            Group::Averages => {
                let ma = moving_averages(close, cfg)?;
                vec![("sma", ma.sma), ("wma", ma.wma), ("ema", ma.ema)]
            }
            Group::Atr => vec![("atr", atr(&bars, cfg.atr_n)?)],
            Group::Momentum => vec![("mom", momentum(close, cfg.mom_n, cfg.momentum_form)?)],
            Group::Stoch => {
                let s = stochastics(&bars, cfg.stoch_n, cfg.stoch_d_n)?;
                vec![("stoch_k", s.k), ("stoch_d", s.d)]
            }
            Group::Boll => {
                let b = bollinger(close, cfg.boll_n, cfg.boll_k)?;
                vec![("boll_upper", b.upper), ("boll_middle", b.middle), ("boll_lower", b.lower)]
            }
            Group::Rsi => vec![("rsi", rsi(close, cfg.rsi_n)?)],
            Group::Lw => vec![("lw", larry_williams(&bars, cfg.lw_n)?)],
            Group::Adosc => vec![("adosc", adosc(&bars, cfg.adosc_fast, cfg.adosc_slow)?)],
            Group::Macd => {
                let m = macd(close, cfg.macd_fast, cfg.macd_slow, cfg.macd_signal)?;
                vec![("macd", m.line), ("macd_signal", m.signal)]
            }
        })
    });
    let mut by_name = std::collections::HashMap::new();
    for g in groups {
        for (name, values) in g? {
            by_name.insert(name, values);
        }
    }
    let columns =
        INDICATOR_COLUMNS.iter().map(|name| Column::from_values(*name, by_name.remove(name).unwrap())).collect();
    Ok(IndicatorTable { dates: candles.dates(), columns })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close_all(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            if x.is_nan() || y.is_nan() {
                assert!(x.is_nan() && y.is_nan(), "index {i}: {x} vs {y}");
            } else {
                assert!((x - y).abs() <= tol * (1.0 + y.abs()), "index {i}: {x} vs {y}");
            }
        }
    }

    fn warm(v: &[f64]) -> usize {
        v.iter().take_while(|x| x.is_nan()).count()
    }

    #[test]
    fn constant_series_averages() {
        let c = vec![5.0; 10];
        let ma = moving_averages(&c, &IndicatorConfig { sma_n: 3, wma_n: 3, ema_n: 3, ..Default::default() }).unwrap();
        for v in [&ma.sma, &ma.wma, &ma.ema] {
            assert_eq!(warm(v), 2);
            assert!(v[2..].iter().all(|&x| (x - 5.0).abs() < 1e-12));
        }
    }

    #[test]
    fn sma_wma_small() {
        let c = [1.0, 2.0, 3.0, 4.0, 5.0];
        close_all(&sma(&c, 3).unwrap()[2..], &[2.0, 3.0, 4.0], 1e-12);
        close_all(&wma(&c, 3).unwrap()[2..], &[14.0 / 6.0, 20.0 / 6.0, 26.0 / 6.0], 1e-12);
    }

    #[test]
    fn period_longer_than_series() {
        assert!(sma(&[1.0, 2.0], 3).is_err());
        assert!(ema(&[1.0, 2.0], 3).is_err());
        assert!(sma(&[1.0], 0).is_err());
    }

    #[test]
    fn rsi_monotone_series() {
        let up: Vec<f64> = (0..40).map(|i| 100.0 + i as f64).collect();
        let down: Vec<f64> = up.iter().rev().copied().collect();
        let r = rsi(&up, 14).unwrap();
        assert_eq!(warm(&r), 13);
        assert!(r[13..].iter().all(|&x| x == 100.0));
        assert!(rsi(&down, 14).unwrap()[13..].iter().all(|&x| x == 0.0));
        assert!(rsi(&up, 0).is_err());
    }

    #[test]
    fn rsi_alternating_centres_on_fifty() {
        // Steady state of Wilder smoothing on +1/-1 alternation: 100*14/27 and 100*13/27.
        let c: Vec<f64> = (0..400).map(|i| 100.0 + (i % 2) as f64).collect();
        let r = rsi(&c, 14).unwrap();
        let (a, b) = (r[398], r[399]);
        assert!(((a + b) / 2.0 - 50.0).abs() < 1e-9);
        let hi = a.max(b);
        assert!((hi - 1400.0 / 27.0).abs() < 1e-9, "{hi}");
    }

    #[test]
    fn stochastic_extremes_and_flat() {
        let bars = Bars {
            high: vec![10.0, 11.0, 12.0, 13.0],
            low: vec![9.0, 10.0, 11.0, 12.0],
            close: vec![9.5, 10.5, 11.5, 13.0],
            volume: vec![1.0; 4],
        };
        let s = stochastics(&bars, 3, 1).unwrap();
        assert_eq!(s.k[3], 100.0);
        let low_close = Bars { close: vec![9.5, 10.5, 11.5, 10.0], ..bars.clone() };
        assert_eq!(stochastics(&low_close, 3, 1).unwrap().k[3], 0.0);
        let flat = Bars { high: vec![1.0; 4], low: vec![1.0; 4], close: vec![1.0; 4], volume: vec![1.0; 4] };
        assert_eq!(stochastics(&flat, 3, 2).unwrap().k[3], 50.0);
        assert_eq!(larry_williams(&flat, 3).unwrap()[3], -50.0);
        assert!(stochastics(&bars, 0, 1).is_err());
    }

    #[test]
    fn bollinger_three_points() {
        let b = bollinger(&[1.0, 2.0, 3.0], 3, 2.0).unwrap();
        let sd = (2.0f64 / 3.0).sqrt();
        assert!((b.middle[2] - 2.0).abs() < 1e-12);
        assert!((b.upper[2] - (2.0 + 2.0 * sd)).abs() < 1e-12);
        assert!((b.lower[2] - (2.0 - 2.0 * sd)).abs() < 1e-12);
        assert!((b.upper[2] - 3.633).abs() < 1e-3 && (b.lower[2] - 0.367).abs() < 1e-3);
        assert!(bollinger(&[1.0, 2.0], 1, 2.0).is_err());
        let flat = bollinger(&[4.0; 5], 3, 2.0).unwrap();
        assert_eq!(flat.upper[4], flat.lower[4]);
    }

    #[test]
    fn macd_constant_and_warmup() {
        let c = vec![7.0; 60];
        let m = macd(&c, 12, 26, 9).unwrap();
        assert_eq!(warm(&m.line), 33);
        assert_eq!(warm(&m.signal), 33);
        assert!(m.line[33..].iter().all(|x| x.abs() < 1e-12));
        assert!(macd(&c, 26, 12, 9).is_err());
    }

    #[test]
    fn macd_on_ramp_converges() {
        // For a unit ramp the EMA lags by (n - 1) / 2 in steady state, so the
        // line converges to (slow - fast) / 2.
        let c: Vec<f64> = (0..400).map(|i| i as f64).collect();
        let m = macd(&c, 12, 26, 9).unwrap();
        assert!((m.line[399] - 7.0).abs() < 1e-6, "{}", m.line[399]);
        assert!((m.signal[399] - 7.0).abs() < 1e-6);
    }

    #[test]
    fn atr_constant_and_gap() {
        let bars = Bars { high: vec![11.0; 20], low: vec![9.0; 20], close: vec![10.0; 20], volume: vec![1.0; 20] };
        let a = atr(&bars, 14).unwrap();
        assert_eq!(warm(&a), 14);
        assert!(a[14..].iter().all(|x| (x - 2.0).abs() < 1e-12));
        let gap =
            Bars { high: vec![11.0, 20.0], low: vec![9.0, 19.0], close: vec![10.0, 19.5], volume: vec![1.0, 1.0] };
        assert_eq!(true_range(&gap)[1], 10.0);
    }

    #[test]
    fn momentum_forms() {
        assert_eq!(momentum(&[10.0, 12.0], 1, MomentumForm::Difference).unwrap()[1], 2.0);
        assert_eq!(momentum(&[10.0, 12.0], 1, MomentumForm::Ratio).unwrap()[1], 120.0);
        assert!(momentum(&[5.0; 5], 2, MomentumForm::Difference).unwrap()[2..].iter().all(|&x| x == 0.0));
        assert!(momentum(&[1.0, 2.0], 0, MomentumForm::Difference).is_err());
    }

    #[test]
    fn williams_positions() {
        let bars = Bars {
            high: vec![10.0, 12.0, 11.0],
            low: vec![8.0, 9.0, 8.5],
            close: vec![9.0, 12.0, 10.0],
            volume: vec![1.0; 3],
        };
        let lw = larry_williams(&bars, 2).unwrap();
        assert_eq!(lw[1], 0.0);
        // window {1,2}: high 12, low 8.5, close 10 -> -(2 / 3.5) * 100
        assert!((lw[2] + 200.0 / 3.5).abs() < 1e-12);
        let mid = Bars { close: vec![9.0, 10.5, 10.25], ..bars };
        assert!((larry_williams(&mid, 2).unwrap()[2] + 50.0).abs() < 1e-12);
    }

    #[test]
    fn adosc_midpoint_close_is_zero() {
        let bars = Bars { high: vec![12.0; 30], low: vec![8.0; 30], close: vec![10.0; 30], volume: vec![1000.0; 30] };
        let a = adosc(&bars, 3, 10).unwrap();
        assert_eq!(warm(&a), 9);
        assert!(a[9..].iter().all(|&x| x == 0.0));
        let one = Bars { high: vec![5.0], low: vec![3.0], close: vec![5.0], volume: vec![42.0] };
        assert_eq!(ad_line(&one), vec![42.0]);
        assert!(adosc(&bars, 10, 3).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(IndicatorConfig::default().validate().is_ok());
        let bad = IndicatorConfig { macd_fast: 30, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = IndicatorConfig { boll_k: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert_eq!(IndicatorConfig::default().max_warmup(), 33);
    }
}
