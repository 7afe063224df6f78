//! Daily-bar multi-asset trading environment.
//!
//! The state holds cash, integer share holdings, and the day's prices,
//! indicators and signal scores. An action is a vector in `[-1, 1]^m`; each
//! component is a trade of `round(a_j * hmax)` whole shares, negative to sell.
//! Sells execute before buys so freed cash can fund purchases the same day.
//! Trades clear at day `t` closes; the reward is the change in total asset
//! value once the portfolio is marked at day `t + 1` closes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{MarketFrame, SignalFrame};
use crate::exec::Exec;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("episode finished: no day after index {0}")]
    EpisodeFinished(usize),
    #[error("invalid action: {0}")]
    InvalidAction(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub initial_cash: f64,
    /// Max shares traded per ticker per step.
    pub hmax: u32,
    pub transaction_cost_rate: f64,
    pub reward_scale: f64,
    /// Expected ticker universe; empty accepts whatever the frames hold.
    pub tickers: Vec<String>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            initial_cash: 1e6,
            hmax: 100,
            transaction_cost_rate: 0.001,
            reward_scale: 1e-4,
            tickers: Vec::new(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidConfig(m.to_string()));
        if !(self.initial_cash.is_finite() && self.initial_cash > 0.0) {
            return bad("initial_cash must be > 0");
        }
        if self.hmax < 1 {
            return bad("hmax must be >= 1");
        }
        if !(0.0..=0.1).contains(&self.transaction_cost_rate) {
            return bad("transaction_cost_rate must lie in [0, 0.1]");
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return bad("reward_scale must be > 0");
        }
        Ok(())
    }
}

/// Per-ticker trade fractions of `hmax`, each within `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionVector(Vec<f64>);

impl ActionVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EnvError> {
        if let Some(v) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(EnvError::InvalidAction(format!(
                "component {v} outside [-1, 1]"
            )));
        }
        Ok(Self(values))
    }

    pub fn hold(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub day_index: usize,
    pub cash: f64,
    pub holdings: Vec<u64>,
    pub prices: Vec<f64>,
    /// `[ticker][indicator]` flattened.
    pub indicators: Vec<f64>,
    pub sentiment: Vec<u8>,
    pub risk: Vec<u8>,
}

impl EnvState {
    pub fn holdings_values(&self) -> Vec<f64> {
        self.holdings
            .iter()
            .zip(&self.prices)
            .map(|(&h, p)| h as f64 * p)
            .collect()
    }

    pub fn total_assets(&self) -> f64 {
        self.cash + self.holdings_values().iter().sum::<f64>()
    }

    /// Observation vector: cash, prices, holdings, indicators, sentiment, risk.
    pub fn features(&self) -> Vec<f64> {
        let mut f = Vec::with_capacity(feature_dim(
            self.prices.len(),
            self.indicators.len() / self.prices.len().max(1),
        ));
        f.push(self.cash);
        f.extend_from_slice(&self.prices);
        f.extend(self.holdings.iter().map(|&h| h as f64));
        f.extend_from_slice(&self.indicators);
        f.extend(self.sentiment.iter().map(|&s| s as f64));
        f.extend(self.risk.iter().map(|&r| r as f64));
        f
    }
}

/// Length of [`EnvState::features`] for `m` tickers with `k` indicators each.
pub fn feature_dim(m: usize, k: usize) -> usize {
    1 + m * (4 + k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    /// `reward_scale * (assets_{t+1} - assets_t)`.
    pub raw_reward: f64,
    pub portfolio_return: f64,
    pub done: bool,
    /// Post-trade holdings valued at the trade-day closes.
    pub post_trade_values: Vec<f64>,
    pub costs: f64,
}

/// Result of executing one action at the current day's closes.
#[derive(Debug, Clone, PartialEq)]
pub struct Trade {
    pub cash: f64,
    pub holdings: Vec<u64>,
    pub costs: f64,
}

pub struct TradingEnv<'a> {
    market: &'a MarketFrame,
    signals: &'a SignalFrame,
    config: EnvConfig,
}

impl<'a> TradingEnv<'a> {
    pub fn new(
        market: &'a MarketFrame,
        signals: &'a SignalFrame,
        config: EnvConfig,
    ) -> Result<Self, EnvError> {
        config.validate()?;
        if !signals.matches(market) {
            return Err(EnvError::ShapeMismatch(
                "market and signal frames have different axes".into(),
            ));
        }
        if market.n_dates() == 0 || market.n_tickers() == 0 {
            return Err(EnvError::ShapeMismatch("empty market frame".into()));
        }
        if !config.tickers.is_empty() && config.tickers.as_slice() != market.tickers() {
            return Err(EnvError::ShapeMismatch(format!(
                "config expects tickers {:?}, frames hold {:?}",
                config.tickers,
                market.tickers()
            )));
        }
        Ok(Self {
            market,
            signals,
            config,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn market(&self) -> &MarketFrame {
        self.market
    }

    pub fn n_tickers(&self) -> usize {
        self.market.n_tickers()
    }

    pub fn n_days(&self) -> usize {
        self.market.n_dates()
    }

    pub fn feature_dim(&self) -> usize {
        feature_dim(self.market.n_tickers(), self.market.n_indicators())
    }

    pub fn reset(&self) -> EnvState {
        self.state_at(0, self.config.initial_cash, vec![0; self.n_tickers()])
    }

    pub fn state_at(&self, day: usize, cash: f64, holdings: Vec<u64>) -> EnvState {
        EnvState {
            day_index: day,
            cash,
            holdings,
            prices: self.market.close_row(day).to_vec(),
            indicators: self.market.indicator_row(day).to_vec(),
            sentiment: self.signals.sentiment_row(day).to_vec(),
            risk: self.signals.risk_row(day).to_vec(),
        }
    }

    /// True when no further step is possible from `state`.
    pub fn is_done(&self, state: &EnvState) -> bool {
        state.day_index + 1 >= self.n_days()
    }

    /// Execute `action` at the state's closes without advancing the day.
    pub fn trade(&self, state: &EnvState, action: &ActionVector) -> Result<Trade, EnvError> {
        let m = self.n_tickers();
        if action.len() != m {
            return Err(EnvError::ShapeMismatch(format!(
                "action has {} components, expected {m}",
                action.len()
            )));
        }
        let hmax = self.config.hmax as f64;
        let rate = self.config.transaction_cost_rate;
        let a = action.as_slice();
        let shares: Vec<i64> = a.iter().map(|x| (x * hmax).round() as i64).collect();

        let mut sells: Vec<usize> = (0..m).filter(|&j| shares[j] < 0).collect();
        sells.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(i.cmp(&j)));
        let mut buys: Vec<usize> = (0..m).filter(|&j| shares[j] > 0).collect();
        buys.sort_by(|&i, &j| a[j].total_cmp(&a[i]).then(i.cmp(&j)));

        let mut cash = state.cash;
        let mut holdings = state.holdings.clone();
        let mut costs = 0.0;
        for j in sells {
            let qty = shares[j].unsigned_abs().min(holdings[j]);
            let value = qty as f64 * state.prices[j];
            cash += value - value * rate;
            costs += value * rate;
            holdings[j] -= qty;
        }
        for j in buys {
            let unit = state.prices[j] * (1.0 + rate);
            let mut qty = (shares[j] as u64).min((cash / unit).floor() as u64);
            while qty > 0 && qty as f64 * unit > cash {
                qty -= 1;
            }
            let value = qty as f64 * state.prices[j];
            cash -= value + value * rate;
            costs += value * rate;
            holdings[j] += qty;
        }
        Ok(Trade {
            cash: cash.max(0.0),
            holdings,
            costs,
        })
    }

    pub fn step(&self, state: &EnvState, action: &ActionVector) -> Result<StepOutcome, EnvError> {
        if self.is_done(state) {
            return Err(EnvError::EpisodeFinished(state.day_index));
        }
        let trade = self.trade(state, action)?;
        let post_trade_values = trade
            .holdings
            .iter()
            .zip(&state.prices)
            .map(|(&h, p)| h as f64 * p)
            .collect();
        let next_state = self.state_at(state.day_index + 1, trade.cash, trade.holdings);
        let before = state.total_assets();
        let after = next_state.total_assets();
        Ok(StepOutcome {
            done: self.is_done(&next_state),
            next_state,
            raw_reward: self.config.reward_scale * (after - before),
            portfolio_return: after / before - 1.0,
            post_trade_values,
            costs: trade.costs,
        })
    }

    /// Evaluate every candidate from the same state; `state` is untouched.
    pub fn peek_group(
        &self,
        state: &EnvState,
        actions: &[ActionVector],
        exec: Exec,
    ) -> Result<Vec<StepOutcome>, EnvError> {
        if actions.is_empty() {
            return Err(EnvError::InvalidAction("empty action group".into()));
        }
        exec.map(actions, |a| self.step(state, a))
            .into_iter()
            .collect()
    }
}
