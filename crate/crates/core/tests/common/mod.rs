//! Brute-force reference implementations shared by the integration tests and
//! the acceptance runner. Each one recomputes from the textbook definition in
//! the most direct (and slowest) way available.

#![allow(dead_code, clippy::needless_range_loop)]

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trendlab::indicators::Bars;
use trendlab::marketdata::{Candle, CandleSeries};

pub type Distance = fn(&[f64], &[f64]) -> f64;
pub type Impurity = fn(f64, f64) -> f64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn close_rel(a: f64, b: f64, rel: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    (a - b).abs() <= rel * b.abs().max(1.0)
}

/// Index and values of the first disagreement, if any.
pub fn first_mismatch(a: &[f64], b: &[f64], rel: f64) -> Option<(usize, f64, f64)> {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).enumerate().find(|(_, (x, y))| !close_rel(**x, **y, rel)).map(|(i, (x, y))| (i, *x, *y))
}

/// Random-walk bars with consistent OHLC ordering.
pub fn random_candles(n: usize, seed: u64) -> CandleSeries {
    let mut r = rng(seed);
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let mut close: f64 = 100.0;
    let candles = (0..n)
        .map(|t| {
            let open: f64 = close * (1.0 + r.random_range(-0.01..0.01));
            close *= 1.0 + r.random_range(-0.04..0.04);
            let high = open.max(close) * (1.0 + r.random_range(0.0..0.02));
            let low = open.min(close) * (1.0 - r.random_range(0.0..0.02));
            Candle {
                date: start + chrono::Days::new(t as u64),
                open,
                high,
                low,
                close,
                volume: r.random_range(1e3..1e6),
            }
        })
        .collect();
    CandleSeries::new(candles).unwrap()
}

pub fn nan(n: usize) -> Vec<f64> {
    vec![f64::NAN; n]
}

pub fn naive_sma(x: &[f64], n: usize) -> Vec<f64> {
    let mut out = nan(x.len());
    for t in n - 1..x.len() {
        out[t] = x[t + 1 - n..=t].iter().sum::<f64>() / n as f64;
    }
    out
}

pub fn naive_wma(x: &[f64], n: usize) -> Vec<f64> {
    let mut out = nan(x.len());
    let denom: f64 = (1..=n).map(|w| w as f64).sum();
    for t in n - 1..x.len() {
        let num: f64 = (0..n).map(|j| (j + 1) as f64 * x[t + 1 - n + j]).sum();
        out[t] = num / denom;
    }
    out
}

/// Closed-form EMA: `(1-k)^(t-s) * seed + sum_j k (1-k)^(t-j) x_j`, seeded at
/// the first index with `n` defined values behind it.
pub fn naive_ema(x: &[f64], n: usize) -> Vec<f64> {
    let start = x.iter().position(|v| v.is_finite()).unwrap();
    let s = start + n - 1;
    let k = 2.0 / (n as f64 + 1.0);
    let seed = x[start..=s].iter().sum::<f64>() / n as f64;
    let mut out = nan(x.len());
    for t in s..x.len() {
        let mut v = (1.0 - k).powi((t - s) as i32) * seed;
        for j in s + 1..=t {
            v += k * (1.0 - k).powi((t - j) as i32) * x[j];
        }
        out[t] = v;
    }
    out
}

/// Wilder smoothing in closed form: the seed decays by `(1 - 1/n)` per step
/// and each later input enters with weight `1/n`.
fn wilder_closed(seed: f64, seed_at: usize, inputs: &[f64], n: usize, t: usize) -> f64 {
    let a = 1.0 - 1.0 / n as f64;
    let mut v = a.powi((t - seed_at) as i32) * seed;
    for j in seed_at + 1..=t {
        v += a.powi((t - j) as i32) * inputs[j] / n as f64;
    }
    v
}

pub fn naive_rsi(c: &[f64], n: usize) -> Vec<f64> {
    let mut gains = vec![0.0; c.len()];
    let mut losses = vec![0.0; c.len()];
    for t in 1..c.len() {
        let d = c[t] - c[t - 1];
        gains[t] = d.max(0.0);
        losses[t] = (-d).max(0.0);
    }
    let g0 = gains[1..n].iter().sum::<f64>() / (n - 1) as f64;
    let l0 = losses[1..n].iter().sum::<f64>() / (n - 1) as f64;
    let mut out = nan(c.len());
    for t in n - 1..c.len() {
        let g = wilder_closed(g0, n - 1, &gains, n, t);
        let l = wilder_closed(l0, n - 1, &losses, n, t);
        out[t] = if l == 0.0 && g == 0.0 {
            50.0
        } else if l == 0.0 {
            100.0
        } else {
            100.0 - 100.0 / (1.0 + g / l)
        };
    }
    out
}

fn window_extremes(b: &Bars, t: usize, n: usize) -> (f64, f64) {
    let hi = b.high[t + 1 - n..=t].iter().cloned().fold(f64::MIN, f64::max);
    let lo = b.low[t + 1 - n..=t].iter().cloned().fold(f64::MAX, f64::min);
    (hi, lo)
}

pub fn naive_stoch_k(b: &Bars, n: usize) -> Vec<f64> {
    let mut out = nan(b.len());
    for t in n - 1..b.len() {
        let (hi, lo) = window_extremes(b, t, n);
        out[t] = if hi > lo { (b.close[t] - lo) / (hi - lo) * 100.0 } else { 50.0 };
    }
    out
}

pub fn naive_stoch_d(b: &Bars, n: usize, d: usize) -> Vec<f64> {
    let k = naive_stoch_k(b, n);
    let mut out = nan(b.len());
    for t in n + d - 2..b.len() {
        out[t] = k[t + 1 - d..=t].iter().sum::<f64>() / d as f64;
    }
    out
}

pub fn naive_lw(b: &Bars, n: usize) -> Vec<f64> {
    let mut out = nan(b.len());
    for t in n - 1..b.len() {
        let (hi, lo) = window_extremes(b, t, n);
        out[t] = if hi > lo { -(hi - b.close[t]) / (hi - lo) * 100.0 } else { -50.0 };
    }
    out
}

/// `(upper, middle, lower)` with a two-pass population deviation.
pub fn naive_bollinger(c: &[f64], n: usize, k: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (mut u, mut m, mut l) = (nan(c.len()), nan(c.len()), nan(c.len()));
    for t in n - 1..c.len() {
        let w = &c[t + 1 - n..=t];
        let mean = w.iter().sum::<f64>() / n as f64;
        let sd = (w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        m[t] = mean;
        u[t] = mean + k * sd;
        l[t] = mean - k * sd;
    }
    (u, m, l)
}

pub fn naive_macd(c: &[f64], fast: usize, slow: usize, signal: usize) -> (Vec<f64>, Vec<f64>) {
    let ef = naive_ema(c, fast);
    let es = naive_ema(c, slow);
    let mut line: Vec<f64> = ef.iter().zip(&es).map(|(a, b)| a - b).collect();
    let mut sig = naive_ema(&line, signal);
    for t in 0..slow + signal - 2 {
        line[t] = f64::NAN;
        sig[t] = f64::NAN;
    }
    (line, sig)
}

pub fn naive_atr(b: &Bars, n: usize) -> Vec<f64> {
    let mut tr = nan(b.len());
    for t in 1..b.len() {
        let pc = b.close[t - 1];
        tr[t] =
            [b.high[t] - b.low[t], (b.high[t] - pc).abs(), (b.low[t] - pc).abs()].into_iter().fold(f64::MIN, f64::max);
    }
    let seed = tr[1..=n].iter().sum::<f64>() / n as f64;
    let mut out = nan(b.len());
    for t in n..b.len() {
        out[t] = wilder_closed(seed, n, &tr, n, t);
    }
    out
}

pub fn naive_momentum(c: &[f64], n: usize) -> Vec<f64> {
    let mut out = nan(c.len());
    for t in n..c.len() {
        out[t] = c[t] - c[t - n];
    }
    out
}

pub fn naive_adosc(b: &Bars, fast: usize, slow: usize) -> Vec<f64> {
    let ad: Vec<f64> = (0..b.len())
        .map(|t| {
            (0..=t)
                .map(|j| {
                    let (h, l, c) = (b.high[j], b.low[j], b.close[j]);
                    if h > l {
                        ((c - l) - (h - c)) / (h - l) * b.volume[j]
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect();
    let ef = naive_ema(&ad, fast);
    let es = naive_ema(&ad, slow);
    ef.iter().zip(&es).map(|(a, b)| a - b).collect()
}

/// AUC as the fraction of (positive, negative) pairs ranked correctly, ties
/// counting one half.
pub fn auc_by_pairs(y: &[u8], s: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] == 1 && y[j] == 0 {
                den += 1.0;
                num += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Exact maximum of the SVM dual `sum(a) - a'Qa/2` subject to `0 <= a <= C`
/// and `y'a = 0`, by enumerating which variables sit at 0, at C or strictly
/// inside, solving the equality-constrained stationarity system for the free
/// set, and keeping the best feasible point. Exponential; for tiny fixtures.
pub fn dual_qp_reference(q: &[Vec<f64>], y: &[f64], c: f64) -> (f64, Vec<f64>) {
    let n = y.len();
    let objective = |a: &[f64]| -> f64 {
        let quad: f64 = (0..n).map(|i| (0..n).map(|j| a[i] * q[i][j] * a[j]).sum::<f64>()).sum();
        a.iter().sum::<f64>() - 0.5 * quad
    };
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut state = vec![0u8; n];
        let mut k = code;
        for s in state.iter_mut() {
            *s = (k % 3) as u8;
            k /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut a: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        if !free.is_empty() {
            // Unknowns: a_free and the multiplier nu.
            // sum_j Q_ij a_j + nu y_i = 1 for i free; sum y_i a_i = 0.
            let m = free.len() + 1;
            let mut mat = vec![vec![0.0; m]; m];
            let mut rhs = vec![0.0; m];
            for (r, &i) in free.iter().enumerate() {
                for (cc, &j) in free.iter().enumerate() {
                    mat[r][cc] = q[i][j];
                }
                mat[r][m - 1] = y[i];
                rhs[r] = 1.0 - (0..n).filter(|j| state[*j] == 1).map(|j| q[i][j] * c).sum::<f64>();
            }
            for (cc, &j) in free.iter().enumerate() {
                mat[m - 1][cc] = y[j];
            }
            rhs[m - 1] = -(0..n).filter(|j| state[*j] == 1).map(|j| y[j] * c).sum::<f64>();
            let Some(sol) = solve_linear(mat, rhs) else { continue };
            for (k, &i) in free.iter().enumerate() {
                a[i] = sol[k];
            }
        }
        let balance: f64 = a.iter().zip(y).map(|(ai, yi)| ai * yi).sum();
        if balance.abs() > 1e-9 || a.iter().any(|&v| v < -1e-9 || v > c + 1e-9) {
            continue;
        }
        let w = objective(&a);
        if w > best.0 {
            best = (w, a);
        }
    }
    best
}

/// Central-difference gradient of `f` at `p`.
pub fn numeric_grad(p: &[f64], eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = q[i];
            q[i] = orig + eps;
            let up = f(&q);
            q[i] = orig - eps;
            let down = f(&q);
            q[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Largest `|a - n| / max(|a| + |n|, floor)` over components.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(floor)).fold(0.0, f64::max)
}

/// k nearest labels by full sort (distance, then index) and majority vote;
/// an even split goes to the nearest neighbor. Returns `(label, vote share)`.
pub fn knn_brute(x: &[Vec<f64>], y: &[u8], q: &[f64], k: usize, dist: impl Fn(&[f64], &[f64]) -> f64) -> (u8, f64) {
    let mut d: Vec<(f64, usize)> = x.iter().enumerate().map(|(i, r)| (dist(r, q), i)).collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let ones = d[..k].iter().filter(|(_, i)| y[*i] == 1).count();
    let label = if 2 * ones > k {
        1
    } else if 2 * ones < k {
        0
    } else {
        y[d[0].1]
    };
    (label, ones as f64 / k as f64)
}

pub fn gini(pos: f64, n: f64) -> f64 {
    let p = pos / n;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

pub fn entropy_bits(pos: f64, n: f64) -> f64 {
    let h = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    h(pos / n) + h(1.0 - pos / n)
}

pub fn entropy_nats(pos: f64, n: f64) -> f64 {
    entropy_bits(pos, n) * std::f64::consts::LN_2
}

/// Best `(feature, threshold, gain)` over every midpoint of every feature,
/// scoring each candidate by re-partitioning the rows from scratch. Earlier
/// features and lower thresholds win ties.
pub fn best_split_brute(
    x: &[Vec<f64>],
    y: &[u8],
    rows: &[usize],
    imp: fn(f64, f64) -> f64,
) -> Option<(usize, f64, f64)> {
    let n = rows.len() as f64;
    let count = |r: &[usize]| r.iter().filter(|&&i| y[i] == 1).count() as f64;
    let parent = imp(count(rows), n);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = rows.iter().map(|&i| x[i][f]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][f] <= t);
            let (nl, nr) = (l.len() as f64, r.len() as f64);
            let child = (nl * imp(count(&l), nl) + nr * imp(count(&r), nr)) / n;
            let gain = parent - child;
            if gain > 1e-12 && best.is_none_or(|b| gain > b.2 + 1e-15) {
                best = Some((f, t, gain));
            }
        }
    }
    best
}
