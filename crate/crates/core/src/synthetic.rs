//! Seeded synthetic market: daily bars from a regime-switching random walk
//! plus tweet-count and search-trend series that track the price action.
//!
//! Used by the examples and tests where real market data is not available.

use std::path::Path;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::marketdata::{Candle, CandleSeries, ExternalSeries};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub rows: usize,
    pub start: NaiveDate,
    pub start_price: f64,
    /// Daily log-return standard deviation.
    pub volatility: f64,
    /// Absolute drift while a regime lasts.
    pub drift: f64,
    /// Probability per day of flipping the drift sign.
    pub switch_prob: f64,
    /// Fraction of attention observations dropped to exercise gap filling.
    pub missing_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            rows: 600,
            start: NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(),
            start_price: 100.0,
            volatility: 0.02,
            drift: 0.004,
            switch_prob: 0.05,
            missing_rate: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthMarket {
    pub candles: CandleSeries,
    pub tweets: ExternalSeries,
    pub trends: ExternalSeries,
}

pub fn generate(cfg: &SynthConfig, seed: u64) -> Result<SynthMarket> {
    if cfg.rows < 2 {
        return Err(Error::param("rows", "need at least 2 rows"));
    }
    if !(cfg.volatility > 0.0) || !(0.0..=1.0).contains(&cfg.switch_prob) || !(0.0..1.0).contains(&cfg.missing_rate) {
        return Err(Error::param("synth", "volatility must be positive and rates in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut sign = 1.0;
    let mut close = cfg.start_price;
    let mut buzz = 0.0f64;
    let mut candles = Vec::with_capacity(cfg.rows);
    let mut tweets = Vec::new();
    let mut trends = Vec::new();
    for t in 0..cfg.rows {
        if rng.random::<f64>() < cfg.switch_prob {
            sign = -sign;
        }
        let date = cfg.start + chrono::Days::new(t as u64);
        let ret = sign * cfg.drift + cfg.volatility * noise.sample(&mut rng);
        let open = close * (1.0 + 0.2 * cfg.volatility * noise.sample(&mut rng));
        close *= ret.exp();
        let spread = cfg.volatility * (0.3 + 0.5 * rng.random::<f64>());
        let high = open.max(close) * (1.0 + spread);
        let low = open.min(close) * (1.0 - spread);
        let volume = 1e6 * (1.0 + 20.0 * ret.abs()) * (0.2 * noise.sample(&mut rng)).exp();
        candles.push(Candle { date, open, high, low, close, volume });

        // Attention follows a smoothed signed return.
        buzz = 0.8 * buzz + 0.2 * ret / cfg.volatility;
        if rng.random::<f64>() >= cfg.missing_rate {
            let count = (2000.0 * (0.4 * buzz + 0.1 * noise.sample(&mut rng)).exp()).round();
            tweets.push((date, count));
        }
        if rng.random::<f64>() >= cfg.missing_rate {
            let score = (50.0 + 25.0 * buzz + 3.0 * noise.sample(&mut rng)).clamp(0.0, 100.0).round();
            trends.push((date, score));
        }
    }
    Ok(SynthMarket {
        candles: CandleSeries::new(candles)?,
        tweets: ExternalSeries::new("tweet", tweets)?,
        trends: ExternalSeries::new("google_trend", trends)?,
    })
}

impl SynthMarket {
    /// Writes `prices.csv`, `tweets.csv` and `trends.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| {
            let p = dir.join(name);
            std::fs::File::create(&p).map_err(|e| Error::io(&p, e))
        };
        self.candles.write_csv(create("prices.csv")?)?;
        self.tweets.write_csv(create("tweets.csv")?)?;
        self.trends.write_csv(create("trends.csv")?)?;
        Ok(())
    }

    pub fn last_date(&self) -> NaiveDate {
        self.candles.candles().last().expect("non-empty").date
    }
}
