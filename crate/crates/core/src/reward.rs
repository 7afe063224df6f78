//! Sentiment/risk reward shaping.
//!
//! Discrete 1..5 scores map to multiplicative factors around 1. For one
//! candidate action the per-ticker factors are averaged with the action's
//! portfolio weights, giving an aggregate sentiment `S` and risk `R`, and the
//! raw reward becomes `raw * S^alpha / (R^beta + denom_epsilon)`.
//!
//! The same multiplier applies to negative rewards, so favorable sentiment
//! amplifies losses as well as gains.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Factor for scores 1..=5.
pub const SCORE_FACTORS: [f64; 5] = [0.99, 0.995, 1.0, 1.005, 1.01];

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("score {0} outside 1..5")]
    ScoreOutOfRange(i64),
    #[error("cannot aggregate over an empty universe")]
    EmptyUniverse,
    #[error("invalid holdings: {0}")]
    InvalidHoldings(String),
    #[error("invalid reward config: {0}")]
    InvalidConfig(String),
}

/// Which portfolio supplies the aggregation weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Holdings after the candidate action's trades.
    #[default]
    PostTrade,
    /// Holdings before trading; every group member shares the weights.
    PreTrade,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Sentiment exponent.
    pub alpha: f64,
    /// Risk exponent.
    pub beta: f64,
    pub denom_epsilon: f64,
    pub weighting: Weighting,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            denom_epsilon: 1e-8,
            weighting: Weighting::PostTrade,
        }
    }
}

impl RewardConfig {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0)
            || !(self.beta.is_finite() && self.beta >= 0.0)
        {
            return Err(RewardError::InvalidConfig(
                "alpha and beta must be finite and >= 0".into(),
            ));
        }
        if !(self.denom_epsilon.is_finite() && self.denom_epsilon > 0.0) {
            return Err(RewardError::InvalidConfig(
                "denom_epsilon must be > 0".into(),
            ));
        }
        Ok(())
    }
}

pub fn score_to_factor(score: i64) -> Result<f64, RewardError> {
    if !(1..=5).contains(&score) {
        return Err(RewardError::ScoreOutOfRange(score));
    }
    Ok(SCORE_FACTORS[(score - 1) as usize])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalAggregate {
    /// Weighted sentiment factor.
    pub sentiment: f64,
    /// Weighted risk factor.
    pub risk: f64,
    pub weights: Vec<f64>,
}

/// Weight per-ticker factors by the value held in each ticker.
///
/// An all-cash portfolio falls back to uniform weights.
pub fn aggregate(
    holdings_value: &[f64],
    sentiment: &[u8],
    risk: &[u8],
) -> Result<SignalAggregate, RewardError> {
    let m = holdings_value.len();
    if m == 0 {
        return Err(RewardError::EmptyUniverse);
    }
    if sentiment.len() != m || risk.len() != m {
        return Err(RewardError::InvalidHoldings(format!(
            "{m} holdings but {} sentiment and {} risk scores",
            sentiment.len(),
            risk.len()
        )));
    }
    if holdings_value.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(RewardError::InvalidHoldings(
            "values must be finite and >= 0".into(),
        ));
    }
    // sums run in a canonical order so that permuting tickers is exact
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        holdings_value[i]
            .total_cmp(&holdings_value[j])
            .then(sentiment[i].cmp(&sentiment[j]))
            .then(risk[i].cmp(&risk[j]))
    });
    let total: f64 = order.iter().map(|&j| holdings_value[j]).sum();
    let weights: Vec<f64> = if total > 0.0 {
        holdings_value.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / m as f64; m]
    };
    let mut s = 0.0;
    let mut r = 0.0;
    for &j in &order {
        s += weights[j] * score_to_factor(sentiment[j] as i64)?;
        r += weights[j] * score_to_factor(risk[j] as i64)?;
    }
    // rounding in the weighted sum can stray a few ulps outside the factor range
    let (lo, hi) = (SCORE_FACTORS[0], SCORE_FACTORS[4]);
    Ok(SignalAggregate {
        sentiment: s.clamp(lo, hi),
        risk: r.clamp(lo, hi),
        weights,
    })
}

pub fn shape_reward(raw: f64, agg: &SignalAggregate, cfg: &RewardConfig) -> f64 {
    raw * agg.sentiment.powf(cfg.alpha) / (agg.risk.powf(cfg.beta) + cfg.denom_epsilon)
}
