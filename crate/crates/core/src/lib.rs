//! Critic-free policy optimization for multi-asset stock trading.
//!
//! The crate is organized bottom-up:
//!
//! - [`data`] parses price and sentiment/risk CSV files and aligns them into
//!   dense date × ticker frames.
//! - [`env`] is a deterministic daily-bar trading environment that can
//!   evaluate a whole group of candidate actions from one state.
//! - [`reward`] maps discrete 1..5 sentiment and risk scores to
//!   multiplicative factors and shapes the raw portfolio reward with them.
//! - [`policy`] is a tanh-squashed Gaussian MLP policy with hand-written
//!   reverse-mode gradients and a bit-exact checkpoint format.
//! - [`dapo`] holds group-normalized advantages, dynamic sampling, the
//!   decoupled-clip surrogate and the training loop.
//! - [`backtest`] and [`metrics`] roll a policy over a held-out period and
//!   compute the evaluation suite.
//!
//! Data-parallel inner loops (group evaluation, per-sample gradients) go
//! through [`exec::Exec`]; with the `parallel` feature disabled every path
//! runs sequentially and produces bit-identical results.

pub mod backtest;
pub mod checkpoint;
pub mod dapo;
pub mod data;
pub mod env;
pub mod exec;
pub mod metrics;
pub mod policy;
pub mod reward;

pub use backtest::{run_backtest, BacktestMode, EquityCurve};
pub use dapo::{train, GroupSample, OptimizerConfig, TrainLog, TrainOutcome};
pub use data::{align, parse_prices, parse_signals, FillPolicy, MarketFrame, SignalFrame};
pub use env::{ActionVector, EnvConfig, EnvState, StepOutcome, TradingEnv};
pub use exec::Exec;
pub use metrics::MetricsReport;
pub use policy::{Policy, PolicyConfig, PolicyParams, PolicySnapshot};
pub use reward::{RewardConfig, SignalAggregate};
