//! Roll a policy over a held-out period and record the equity curve.

use std::fmt::Write as _;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::MarketFrame;
use crate::env::{EnvError, TradingEnv};
use crate::metrics::{MetricsError, MetricsReport};
use crate::policy::{self, Policy, PolicyError};

#[derive(Debug, Error, PartialEq)]
pub enum BacktestError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("policy expects {expected} tickers/features, data has {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("benchmark has {got} closes for {expected} dates")]
    BenchmarkLength { expected: usize, got: usize },
    #[error("malformed equity csv at line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BacktestMode {
    /// Trade the squashed policy mean.
    #[default]
    Deterministic,
    /// Sample one action per day from the policy.
    Stochastic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquityCurve {
    pub dates: Vec<NaiveDate>,
    pub total_assets: Vec<f64>,
    /// `total_assets[t + 1] / total_assets[t] - 1`; one shorter than `dates`.
    pub returns: Vec<f64>,
    pub benchmark_returns: Option<Vec<f64>>,
}

impl EquityCurve {
    pub fn new(
        dates: Vec<NaiveDate>,
        total_assets: Vec<f64>,
        benchmark_closes: Option<&[f64]>,
    ) -> Result<Self, BacktestError> {
        if let Some(b) = benchmark_closes {
            if b.len() != dates.len() {
                return Err(BacktestError::BenchmarkLength {
                    expected: dates.len(),
                    got: b.len(),
                });
            }
        }
        Ok(Self {
            returns: crate::metrics::daily_returns(&total_assets),
            benchmark_returns: benchmark_closes.map(crate::metrics::daily_returns),
            dates,
            total_assets,
        })
    }

    pub fn metrics(&self) -> Result<MetricsReport, MetricsError> {
        MetricsReport::compute(&self.total_assets, self.benchmark_returns.as_deref())
    }

    /// `date,total_assets,return,benchmark_return`; the first row leaves both
    /// return columns empty, as does any row without a benchmark.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,total_assets,return,benchmark_return\n");
        for (i, (d, a)) in self.dates.iter().zip(&self.total_assets).enumerate() {
            let ret = if i == 0 {
                String::new()
            } else {
                self.returns[i - 1].to_string()
            };
            let bench = match (&self.benchmark_returns, i) {
                (Some(b), i) if i > 0 => b[i - 1].to_string(),
                _ => String::new(),
            };
            writeln!(out, "{d},{a},{ret},{bench}").expect("writing to a String cannot fail");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, BacktestError> {
        let bad = |line: usize, reason: &str| BacktestError::Csv {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("date,total_assets,return,benchmark_return") {
            return Err(bad(1, "unexpected header"));
        }
        let (mut dates, mut assets, mut bench) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad(i + 2, "expected 4 fields"));
            }
            dates.push(
                NaiveDate::parse_from_str(f[0], "%Y-%m-%d")
                    .map_err(|e| bad(i + 2, &e.to_string()))?,
            );
            assets.push(
                f[1].parse::<f64>()
                    .map_err(|e| bad(i + 2, &e.to_string()))?,
            );
            if i > 0 && !f[3].is_empty() {
                bench.push(
                    f[3].parse::<f64>()
                        .map_err(|e| bad(i + 2, &e.to_string()))?,
                );
            }
        }
        let benchmark_returns =
            (!bench.is_empty() && bench.len() + 1 == dates.len()).then_some(bench);
        Ok(Self {
            returns: crate::metrics::daily_returns(&assets),
            dates,
            total_assets: assets,
            benchmark_returns,
        })
    }

    /// Growth of one unit of the benchmark, aligned with `dates`.
    pub fn benchmark_growth(&self) -> Option<Vec<f64>> {
        let b = self.benchmark_returns.as_ref()?;
        let mut level = 1.0;
        let mut out = vec![1.0];
        for r in b {
            level *= 1.0 + r;
            out.push(level);
        }
        Some(out)
    }
}

/// Index level of an equal-weight buy-and-hold portfolio over every ticker.
pub fn equal_weight_benchmark(market: &MarketFrame) -> Vec<f64> {
    let m = market.n_tickers() as f64;
    let first = market.close_row(0).to_vec();
    (0..market.n_dates())
        .map(|d| {
            market
                .close_row(d)
                .iter()
                .zip(&first)
                .map(|(c, c0)| c / c0)
                .sum::<f64>()
                / m
        })
        .collect()
}

/// Run `policy` from day 0 to the last day. The normalizer is frozen.
pub fn run_backtest(
    env: &TradingEnv,
    policy: &Policy,
    benchmark_closes: Option<&[f64]>,
    mode: BacktestMode,
    seed: u64,
) -> Result<EquityCurve, BacktestError> {
    if policy.action_dim() != env.n_tickers() {
        return Err(BacktestError::ShapeMismatch {
            expected: policy.action_dim(),
            got: env.n_tickers(),
        });
    }
    if policy.input_dim() != env.feature_dim() {
        return Err(BacktestError::ShapeMismatch {
            expected: policy.input_dim(),
            got: env.feature_dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = env.reset();
    let mut assets = vec![state.total_assets()];
    while !env.is_done(&state) {
        let obs = policy.normalizer.normalize(&state.features());
        let action = match mode {
            BacktestMode::Deterministic => policy::mean_action(&policy.params, &obs)?,
            BacktestMode::Stochastic => {
                policy::sample_group(&policy.params, &obs, 1, &mut rng)?.remove(0)
            }
        };
        state = env.step(&state, &action)?.next_state;
        assets.push(state.total_assets());
    }
    EquityCurve::new(env.market().dates().to_vec(), assets, benchmark_closes)
}
