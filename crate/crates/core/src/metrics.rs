//! Evaluation metrics over an equity curve and its daily returns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRADING_DAYS: f64 = 252.0;
pub const DEFAULT_TAIL: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("lower tail has no losses; ratio undefined")]
    ZeroLossTail,
    #[error("excess returns have zero standard deviation")]
    ZeroTrackingError,
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("tail level must lie in (0, 0.5]")]
    BadLevel,
}

pub type Result<T> = std::result::Result<T, MetricsError>;

fn need(got: usize, needed: usize) -> Result<()> {
    if got < needed {
        return Err(MetricsError::InsufficientData { needed, got });
    }
    Ok(())
}

pub fn cumulative_return(assets: &[f64]) -> Result<f64> {
    need(assets.len(), 2)?;
    Ok(assets[assets.len() - 1] / assets[0] - 1.0)
}

/// Most negative `assets_t / running_peak_t - 1`; zero for a curve that never dips.
pub fn max_drawdown(assets: &[f64]) -> Result<f64> {
    need(assets.len(), 2)?;
    let mut peak = assets[0];
    let mut worst = 0.0f64;
    for &a in assets {
        peak = peak.max(a);
        worst = worst.min(a / peak - 1.0);
    }
    Ok(worst)
}

/// `assets_{t+1} / assets_t - 1`.
pub fn daily_returns(assets: &[f64]) -> Vec<f64> {
    assets.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
}

/// Observations in a `level` tail of `n`: `ceil(level * n)`, robust to
/// rounding in the product.
pub fn tail_count(n: usize, level: f64) -> usize {
    ((level * n as f64) - 1e-9).ceil().max(0.0) as usize
}

fn check_tail(n: usize, level: f64) -> Result<usize> {
    if !(level > 0.0 && level <= 0.5) {
        return Err(MetricsError::BadLevel);
    }
    // a full tail observation requires level * n >= 1
    need(n, (1.0 / level - 1e-9).ceil() as usize)?;
    Ok(tail_count(n, level))
}

fn sorted(returns: &[f64]) -> Vec<f64> {
    let mut v = returns.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Expected shortfall: mean of the worst `ceil(level * N)` returns.
pub fn cvar(returns: &[f64], level: f64) -> Result<f64> {
    let k = check_tail(returns.len(), level)?;
    Ok(mean(&sorted(returns)[..k]))
}

/// Mean of the best `ceil(tail * N)` returns over the magnitude of the mean of
/// the worst `ceil(tail * N)`.
pub fn rachev_ratio(returns: &[f64], tail: f64) -> Result<f64> {
    let k = check_tail(returns.len(), tail)?;
    let s = sorted(returns);
    let loss = mean(&s[..k]);
    if loss >= 0.0 {
        return Err(MetricsError::ZeroLossTail);
    }
    let mut best = s[s.len() - k..].to_vec();
    best.reverse();
    Ok(mean(&best) / loss.abs())
}

/// Mean excess return over its sample standard deviation (divisor N - 1),
/// optionally scaled by √252.
pub fn information_ratio(returns: &[f64], benchmark: &[f64], annualize: bool) -> Result<f64> {
    if returns.len() != benchmark.len() {
        return Err(MetricsError::LengthMismatch(returns.len(), benchmark.len()));
    }
    need(returns.len(), 2)?;
    let excess: Vec<f64> = returns.iter().zip(benchmark).map(|(r, b)| r - b).collect();
    let m = mean(&excess);
    let var = excess.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (excess.len() - 1) as f64;
    let sd = var.sqrt();
    if sd < 1e-14 {
        return Err(MetricsError::ZeroTrackingError);
    }
    let ir = m / sd;
    Ok(if annualize {
        ir * TRADING_DAYS.sqrt()
    } else {
        ir
    })
}

/// Fraction of days with strategy return strictly above the benchmark's.
pub fn outperformance_frequency(returns: &[f64], benchmark: &[f64]) -> Result<f64> {
    if returns.len() != benchmark.len() {
        return Err(MetricsError::LengthMismatch(returns.len(), benchmark.len()));
    }
    need(returns.len(), 1)?;
    let wins = returns.iter().zip(benchmark).filter(|(r, b)| r > b).count();
    Ok(wins as f64 / returns.len() as f64)
}

/// The six headline metrics. Metrics that are undefined for the given curve
/// are `None`, with the reason in `notes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cumulative_return: f64,
    pub max_drawdown: f64,
    pub rachev_ratio: Option<f64>,
    pub information_ratio: Option<f64>,
    pub information_ratio_annualized: Option<f64>,
    pub cvar_5: Option<f64>,
    pub outperformance_frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl MetricsReport {
    pub fn compute(assets: &[f64], benchmark_returns: Option<&[f64]>) -> Result<Self> {
        let returns = daily_returns(assets);
        let mut notes = Vec::new();
        let mut keep = |name: &str, r: Result<f64>| match r {
            Ok(v) => Some(v),
            Err(e) => {
                notes.push(format!("{name}: {e}"));
                None
            }
        };
        let cumulative_return = cumulative_return(assets)?;
        let max_drawdown = max_drawdown(assets)?;
        let rachev_ratio = keep("rachev_ratio", rachev_ratio(&returns, DEFAULT_TAIL));
        let cvar_5 = keep("cvar_5", cvar(&returns, DEFAULT_TAIL));
        let (information_ratio, information_ratio_annualized, outperformance_frequency) =
            match benchmark_returns {
                Some(b) => (
                    keep("information_ratio", information_ratio(&returns, b, false)),
                    information_ratio(&returns, b, true).ok(),
                    keep(
                        "outperformance_frequency",
                        outperformance_frequency(&returns, b),
                    ),
                ),
                None => {
                    notes.push(
                        "no benchmark: information ratio and outperformance undefined".into(),
                    );
                    (None, None, None)
                }
            };
        Ok(Self {
            cumulative_return,
            max_drawdown,
            rachev_ratio,
            information_ratio,
            information_ratio_annualized,
            cvar_5,
            outperformance_frequency,
            notes,
        })
    }

    /// `(row name, formatted value)` in the order of the evaluation table.
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        self.rows_with(false)
    }

    /// Like [`MetricsReport::rows`]; `annualized_ir` leads the information
    /// ratio cell with the √252-scaled value.
    pub fn rows_with(&self, annualized_ir: bool) -> Vec<(&'static str, String)> {
        let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{:.2}%", v * 100.0));
        let num = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}"));
        let ir = match (self.information_ratio, self.information_ratio_annualized) {
            (Some(d), Some(a)) if annualized_ir => format!("{a:.2} (daily {d:.2})"),
            (Some(d), Some(a)) => format!("{d:.2} (annualized {a:.2})"),
            (d, _) => num(d),
        };
        vec![
            ("Cumulative Return", pct(Some(self.cumulative_return))),
            ("Max Drawdown", pct(Some(self.max_drawdown))),
            ("Rachev Ratio", num(self.rachev_ratio)),
            ("Information Ratio", ir),
            ("CVaR (5%)", pct(self.cvar_5)),
            (
                "Outperformance Frequency",
                self.outperformance_frequency
                    .map_or("n/a".into(), |v| format!("{:.1}%", v * 100.0)),
            ),
        ]
    }

    /// Plain-text two-column table.
    pub fn to_table(&self, title: &str) -> String {
        comparison_table(&[(title, self)])
    }
}

/// One metric per row, one column per report.
pub fn comparison_table(columns: &[(&str, &MetricsReport)]) -> String {
    comparison_table_with(columns, false)
}

pub fn comparison_table_with(columns: &[(&str, &MetricsReport)], annualized_ir: bool) -> String {
    let names: Vec<&str> = columns.first().map_or(vec![], |(_, r)| {
        r.rows_with(annualized_ir).iter().map(|(n, _)| *n).collect()
    });
    let cells: Vec<Vec<String>> = columns
        .iter()
        .map(|(_, r)| {
            r.rows_with(annualized_ir)
                .into_iter()
                .map(|(_, v)| v)
                .collect()
        })
        .collect();
    let first = names
        .iter()
        .map(|n| n.len())
        .max()
        .unwrap_or(0)
        .max("Metric".len());
    let widths: Vec<usize> = columns
        .iter()
        .zip(&cells)
        .map(|((h, _), c)| c.iter().map(String::len).max().unwrap_or(0).max(h.len()))
        .collect();
    let mut out = format!("{:<first$}", "Metric");
    for ((h, _), w) in columns.iter().zip(&widths) {
        out.push_str(&format!("  {h:>w$}"));
    }
    out.push('\n');
    out.push_str(&"-".repeat(first + widths.iter().map(|w| w + 2).sum::<usize>()));
    out.push('\n');
    for (i, name) in names.iter().enumerate() {
        out.push_str(&format!("{name:<first$}"));
        for (c, w) in cells.iter().zip(&widths) {
            out.push_str(&format!("  {:>w$}", c[i]));
        }
        out.push('\n');
    }
    out
}
