//! Command-line runner: `train`, `backtest`, `sweep` and `report` over a TOML
//! run configuration.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use finrl_dapo::dapo::DapoError;
use thiserror::Error;

pub mod config;
pub mod plot;
pub mod run;
pub mod synth;

pub use config::{Overrides, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training failed: {0}")]
    Training(DapoError),
    #[error("{0}")]
    Run(String),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for training failures the data cannot fix by retrying; 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Training(_) => 2,
            _ => 1,
        }
    }
}

impl From<DapoError> for CliError {
    fn from(e: DapoError) -> Self {
        match e {
            DapoError::AllFiltered { .. } | DapoError::NonFiniteLoss => CliError::Training(e),
            DapoError::InvalidConfig(m) => CliError::Config(m),
            other => CliError::Run(other.to_string()),
        }
    }
}

/// Print a non-fatal diagnostic.
pub fn warn(msg: impl std::fmt::Display) {
    eprintln!("WARN: {msg}");
}

#[derive(Debug, Parser)]
#[command(
    name = "finrl-dapo",
    version,
    about = "Train and evaluate DAPO trading agents with sentiment/risk reward shaping"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override a config value; repeatable, applied in order, always wins over the file.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub sets: Vec<String>,
    /// Shorthand for `--set optimizer.seed=N`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, replacing `out_dir` from the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy and write checkpoint, log and resolved config.
    Train,
    /// Evaluate a checkpoint over the eval range.
    Backtest {
        /// Defaults to `<out>/checkpoint.bin`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train and backtest one run per (alpha, beta) pair.
    Sweep {
        /// `ALPHA,BETA`; repeatable. Replaces `sweep.grid` from the config.
        #[arg(long = "pair", value_name = "ALPHA,BETA", allow_hyphen_values = true)]
        pairs: Vec<String>,
    },
    /// Cumulative-return chart and metrics table for a run or sweep directory.
    Report {
        /// Defaults to `--out`, then the config's `out_dir`.
        #[arg(long)]
        run_dir: Option<PathBuf>,
        /// Single-ticker prices file to overlay instead of the curves' own benchmark.
        #[arg(long)]
        benchmark: Option<PathBuf>,
    },
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            sets: self.sets.clone(),
            seed: self.seed,
            out: self.out.clone(),
        }
    }

    fn load_config(&self) -> Result<RunConfig, CliError> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Config("--config is required".into()))?;
        RunConfig::load(path, &self.overrides())
    }

    pub fn execute(&self) -> Result<(), CliError> {
        match &self.command {
            Command::Train => {
                let cfg = self.load_config()?;
                let out = run::train(&cfg)?;
                println!(
                    "trained {} epochs on {} tickers; checkpoint at {}",
                    out.epochs,
                    out.tickers.len(),
                    cfg.out_dir.join(run::CHECKPOINT).display()
                );
            }
            Command::Backtest { checkpoint } => {
                let cfg = self.load_config()?;
                let ckpt = checkpoint
                    .clone()
                    .unwrap_or_else(|| cfg.out_dir.join(run::CHECKPOINT));
                let report = run::backtest(&cfg, &ckpt)?;
                print!(
                    "{}",
                    finrl_dapo::metrics::comparison_table_with(
                        &[("DAPO", &report)],
                        cfg.eval.annualize
                    )
                );
            }
            Command::Sweep { pairs } => {
                let cfg = self.load_config()?;
                let grid = if pairs.is_empty() {
                    cfg.sweep.grid.iter().map(|p| (p[0], p[1])).collect()
                } else {
                    pairs
                        .iter()
                        .map(|p| run::parse_pair(p))
                        .collect::<Result<Vec<_>, _>>()?
                };
                let outcome = run::sweep(&cfg, &grid)?;
                print!("{}", outcome.table);
            }
            Command::Report { run_dir, benchmark } => {
                let dir = match (run_dir, &self.out) {
                    (Some(d), _) | (None, Some(d)) => d.clone(),
                    (None, None) => self.load_config()?.out_dir,
                };
                let table = run::report(&dir, benchmark.as_deref())?;
                print!("{table}");
            }
        }
        Ok(())
    }
}

/// Apply `FINRL_DAPO_THREADS` to the global thread pool.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("FINRL_DAPO_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n >= 1).ok_or_else(|| {
        CliError::Config(format!(
            "FINRL_DAPO_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))
}
