//! Seeded synthetic markets whose sentiment scores lead next-day returns.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub tickers: Vec<String>,
    pub start: NaiveDate,
    pub days: usize,
    /// Daily drift shared by every ticker.
    pub drift: f64,
    /// Extra next-day return per sentiment point above neutral.
    pub sentiment_edge: f64,
    /// Daily volatility at risk score 3; scales linearly with the score.
    pub base_vol: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            tickers: vec!["AAA".into(), "BBB".into()],
            start: NaiveDate::from_ymd_opt(2021, 1, 4).expect("valid date"),
            days: 60,
            drift: 0.0005,
            sentiment_edge: 0.004,
            base_vol: 0.006,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub dates: Vec<NaiveDate>,
    pub prices_csv: String,
    pub signals_csv: String,
    /// Equal-weight index of the universe, as a single-ticker prices file.
    pub benchmark_csv: String,
}

/// Weekdays only, starting at `start`.
pub fn trading_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut d = start;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

pub fn generate(spec: &SynthSpec) -> SynthData {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let m = spec.tickers.len();
    let dates = trading_days(spec.start, spec.days);
    let mut price: Vec<f64> = (0..m).map(|j| 40.0 + 20.0 * j as f64).collect();
    let first = price.clone();
    let mut prices_csv = String::from("date,ticker,close,momentum\n");
    let mut signals_csv = String::from("date,ticker,sentiment,risk\n");
    let mut benchmark_csv = String::from("date,ticker,close\n");
    let mut prev_sent = vec![3u8; m];
    let mut prev_risk = vec![3u8; m];
    let mut prev_price = price.clone();
    for (t, d) in dates.iter().enumerate() {
        if t > 0 {
            for j in 0..m {
                let z: f64 = rng.sample(StandardNormal);
                let vol = spec.base_vol * prev_risk[j] as f64 / 3.0;
                let r = spec.drift + spec.sentiment_edge * (prev_sent[j] as f64 - 3.0) + vol * z;
                prev_price[j] = price[j];
                price[j] *= (1.0 + r).max(0.5);
            }
        }
        let mut index = 0.0;
        for j in 0..m {
            let s: u8 = rng.random_range(1..=5);
            let k: u8 = rng.random_range(1..=5);
            let momentum = price[j] / prev_price[j] - 1.0;
            let _ = writeln!(
                prices_csv,
                "{d},{},{},{momentum}",
                spec.tickers[j], price[j]
            );
            let _ = writeln!(signals_csv, "{d},{},{s},{k}", spec.tickers[j]);
            prev_sent[j] = s;
            prev_risk[j] = k;
            index += price[j] / first[j] / m as f64;
        }
        let _ = writeln!(benchmark_csv, "{d},INDEX,{}", 100.0 * index);
    }
    SynthData {
        dates,
        prices_csv,
        signals_csv,
        benchmark_csv,
    }
}

/// Write `prices.csv`, `signals.csv` and `benchmark.csv` into `dir`.
pub fn write_to(dir: &Path, data: &SynthData) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for (name, text) in [
        ("prices.csv", &data.prices_csv),
        ("signals.csv", &data.signals_csv),
        ("benchmark.csv", &data.benchmark_csv),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
    }
    Ok(())
}
