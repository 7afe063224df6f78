//! The four commands. Each writes its artifacts under the configured output
//! directory and returns a summary for the terminal.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use finrl_dapo::backtest::equal_weight_benchmark;
use finrl_dapo::checkpoint::Checkpoint;
use finrl_dapo::data::{benchmark_closes, Aligned};
use finrl_dapo::metrics::comparison_table_with;
use finrl_dapo::{
    align, parse_prices, parse_signals, run_backtest, train as train_policy, BacktestMode,
    EnvConfig, EquityCurve, Exec, MarketFrame, MetricsReport, Policy, SignalFrame, TradingEnv,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::plot::{self, Series};
use crate::{warn, CliError, RunConfig};

pub const CHECKPOINT: &str = "checkpoint.bin";
pub const TRAIN_LOG: &str = "train_log.tsv";
pub const TIMINGS: &str = "timings.tsv";
pub const RESOLVED_CONFIG: &str = "resolved_config.toml";
pub const RUN_SUMMARY: &str = "run_summary.json";
pub const EQUITY: &str = "equity.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_TXT: &str = "metrics.txt";
pub const COMPARISON: &str = "comparison.txt";
pub const SWEEP_SUMMARY: &str = "sweep_summary.json";
pub const REPORT_SVG: &str = "report.svg";
pub const REPORT_TXT: &str = "report.txt";

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summaries serialize to JSON");
    s.push('\n');
    s
}

/// Parsed and aligned inputs, shared by every job of a command.
pub struct Inputs {
    pub aligned: Aligned,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs, CliError> {
    let data = |p: &Path, e: &dyn std::fmt::Display| {
        let msg = e.to_string();
        let shown = p.display().to_string();
        CliError::Data(if msg.contains(&shown) {
            msg
        } else {
            format!("{shown}: {msg}")
        })
    };
    let prices = parse_prices(&cfg.data.prices).map_err(|e| data(&cfg.data.prices, &e))?;
    let signals = parse_signals(&cfg.data.signals).map_err(|e| data(&cfg.data.signals, &e))?;
    let aligned =
        align(&prices, &signals, cfg.data.fill).map_err(|e| CliError::Data(e.to_string()))?;
    for w in &aligned.report.warnings {
        warn(w);
    }
    if aligned.report.neutral_filled > 0 {
        log::info!(
            "{} missing signal cells set to the neutral score",
            aligned.report.neutral_filled
        );
    }
    Ok(Inputs { aligned })
}

impl Inputs {
    fn window(
        &self,
        start: Option<NaiveDate>,
        end: Option<NaiveDate>,
        what: &str,
    ) -> Result<(MarketFrame, SignalFrame), CliError> {
        let bad = |e: finrl_dapo::data::DataError| CliError::Data(format!("{what} range: {e}"));
        let market = self.aligned.market.restrict(start, end).map_err(bad)?;
        let signals = self.aligned.signals.restrict(start, end).map_err(bad)?;
        Ok((market, signals))
    }
}

fn env_config(cfg: &RunConfig, market: &MarketFrame) -> EnvConfig {
    let mut env = cfg.env.clone();
    if env.tickers.is_empty() {
        env.tickers = market.tickers().to_vec();
    }
    env
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub tickers: Vec<String>,
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub train_days: usize,
    pub n_params: usize,
    pub epochs: usize,
    pub final_epoch: Option<FinalEpoch>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalEpoch {
    pub epoch: usize,
    pub mean_raw_reward: f64,
    pub mean_shaped_reward: f64,
    pub filtered_fraction: f64,
    pub loss: f64,
}

pub fn train(cfg: &RunConfig) -> Result<TrainSummary, CliError> {
    let inputs = load_inputs(cfg)?;
    train_with(cfg, &inputs)
}

fn train_with(cfg: &RunConfig, inputs: &Inputs) -> Result<TrainSummary, CliError> {
    let (market, signals) = inputs.window(cfg.data.train_start, cfg.data.train_end, "train")?;
    let env = TradingEnv::new(&market, &signals, env_config(cfg, &market))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let policy = Policy::new(
        env.feature_dim(),
        env.n_tickers(),
        &cfg.policy,
        cfg.optimizer.seed,
    );
    let n_params = policy.params.len();
    let outcome = train_policy(&env, policy, &cfg.optimizer, &cfg.reward, Exec::default())?;

    ensure_dir(&cfg.out_dir)?;
    let ckpt = Checkpoint {
        tickers: market.tickers().to_vec(),
        policy: outcome.policy,
    };
    write(&cfg.out_dir.join(CHECKPOINT), ckpt.to_bytes())?;
    write(&cfg.out_dir.join(TRAIN_LOG), outcome.log.to_tsv())?;
    write(&cfg.out_dir.join(TIMINGS), outcome.log.timings_tsv())?;
    write(&cfg.out_dir.join(RESOLVED_CONFIG), cfg.to_toml())?;

    let summary = TrainSummary {
        tickers: market.tickers().to_vec(),
        train_start: market.dates()[0],
        train_end: *market.dates().last().expect("window is non-empty"),
        train_days: market.n_dates(),
        n_params,
        epochs: outcome.log.epochs.len(),
        final_epoch: outcome.log.epochs.last().map(|e| FinalEpoch {
            epoch: e.epoch,
            mean_raw_reward: e.mean_raw_reward,
            mean_shaped_reward: e.mean_shaped_reward,
            filtered_fraction: e.filtered_fraction,
            loss: e.loss,
        }),
        config: cfg.clone(),
    };
    write(&cfg.out_dir.join(RUN_SUMMARY), json(&summary))?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
struct BacktestMeta {
    checkpoint: PathBuf,
    tickers: Vec<String>,
    start: NaiveDate,
    end: NaiveDate,
    days: usize,
    mode: BacktestMode,
    seed: u64,
    /// `file` or `equal_weight`.
    benchmark: &'static str,
    annualize: bool,
}

#[derive(Debug, Clone, Serialize)]
struct MetricsFile<'a> {
    #[serde(flatten)]
    metrics: &'a MetricsReport,
    run: BacktestMeta,
}

pub fn backtest(cfg: &RunConfig, checkpoint: &Path) -> Result<MetricsReport, CliError> {
    let ckpt = Checkpoint::load(checkpoint)
        .map_err(|e| CliError::Data(format!("{}: {e}", checkpoint.display())))?;
    let inputs = load_inputs(cfg)?;
    backtest_with(cfg, &inputs, &ckpt, checkpoint)
}

fn backtest_with(
    cfg: &RunConfig,
    inputs: &Inputs,
    ckpt: &Checkpoint,
    ckpt_path: &Path,
) -> Result<MetricsReport, CliError> {
    let train_given = cfg.data.train_start.is_some() || cfg.data.train_end.is_some();
    if train_given && cfg.eval.start.is_none() && cfg.eval.end.is_none() {
        warn(
            "eval range not set; backtesting over all aligned dates, including the training range",
        );
    }
    let (market, signals) = inputs.window(cfg.eval.start, cfg.eval.end, "eval")?;
    if ckpt.tickers != market.tickers() {
        return Err(CliError::Run(format!(
            "checkpoint trades {} tickers {:?} but the data holds {} {:?}",
            ckpt.tickers.len(),
            ckpt.tickers,
            market.n_tickers(),
            market.tickers()
        )));
    }
    let env = TradingEnv::new(&market, &signals, env_config(cfg, &market))
        .map_err(|e| CliError::Config(e.to_string()))?;
    if market.n_dates() < 2 {
        return Err(CliError::Data(
            "eval range holds fewer than two dates".into(),
        ));
    }

    let (bench, source) = match &cfg.data.benchmark {
        Some(path) => {
            let prices = parse_prices(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let closes = benchmark_closes(&prices, market.dates())
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            (closes, "file")
        }
        None => (equal_weight_benchmark(&market), "equal_weight"),
    };
    let curve = run_backtest(
        &env,
        &ckpt.policy,
        Some(&bench),
        cfg.eval.mode,
        cfg.eval.seed,
    )
    .map_err(|e| CliError::Run(format!("backtest: {e}")))?;
    let report = curve
        .metrics()
        .map_err(|e| CliError::Run(format!("metrics: {e}")))?;
    for note in &report.notes {
        warn(note);
    }

    ensure_dir(&cfg.out_dir)?;
    write(&cfg.out_dir.join(EQUITY), curve.to_csv())?;
    let meta = BacktestMeta {
        checkpoint: ckpt_path.to_path_buf(),
        tickers: market.tickers().to_vec(),
        start: market.dates()[0],
        end: *market.dates().last().expect("at least two dates"),
        days: market.n_dates(),
        mode: cfg.eval.mode,
        seed: cfg.eval.seed,
        benchmark: source,
        annualize: cfg.eval.annualize,
    };
    write(
        &cfg.out_dir.join(METRICS_JSON),
        json(&MetricsFile {
            metrics: &report,
            run: meta,
        }),
    )?;
    write(
        &cfg.out_dir.join(METRICS_TXT),
        comparison_table_with(&[("DAPO", &report)], cfg.eval.annualize),
    )?;
    Ok(report)
}

pub fn parse_pair(text: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Config(format!("--pair {text:?}: expected ALPHA,BETA"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

pub fn pair_dir(alpha: f64, beta: f64) -> String {
    format!("alpha{alpha}_beta{beta}")
}

#[derive(Debug, Clone, Serialize)]
pub struct PairResult {
    pub alpha: f64,
    pub beta: f64,
    pub dir: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub results: Vec<PairResult>,
    pub table: String,
}

/// One row per pair and one column per metric, then a line per failure.
pub fn sweep_table(results: &[PairResult], annualized_ir: bool) -> String {
    let ok: Vec<(String, Vec<(&str, String)>)> = results
        .iter()
        .filter_map(|r| {
            r.metrics.as_ref().map(|m| {
                (
                    format!("alpha={} beta={}", r.alpha, r.beta),
                    m.rows_with(annualized_ir),
                )
            })
        })
        .collect();
    let mut out = String::new();
    if let Some((_, first)) = ok.first() {
        let headers: Vec<&str> = first.iter().map(|(n, _)| *n).collect();
        let w0 = ok
            .iter()
            .map(|(l, _)| l.len())
            .max()
            .unwrap_or(0)
            .max("Setting".len());
        let widths: Vec<usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| {
                ok.iter()
                    .map(|(_, r)| r[i].1.len())
                    .max()
                    .unwrap_or(0)
                    .max(h.len())
            })
            .collect();
        out.push_str(&format!("{:<w0$}", "Setting"));
        for (h, w) in headers.iter().zip(&widths) {
            out.push_str(&format!("  {h:>w$}"));
        }
        out.push('\n');
        out.push_str(&"-".repeat(w0 + widths.iter().map(|w| w + 2).sum::<usize>()));
        out.push('\n');
        for (label, rows) in &ok {
            out.push_str(&format!("{label:<w0$}"));
            for ((_, v), w) in rows.iter().zip(&widths) {
                out.push_str(&format!("  {v:>w$}"));
            }
            out.push('\n');
        }
    }
    for r in results.iter().filter(|r| r.metrics.is_none()) {
        out.push_str(&format!(
            "FAILED alpha={} beta={}: {}\n",
            r.alpha,
            r.beta,
            r.error.as_deref().unwrap_or("unknown error")
        ));
    }
    out
}

pub fn sweep(cfg: &RunConfig, grid: &[(f64, f64)]) -> Result<SweepOutcome, CliError> {
    if grid.is_empty() {
        return Err(CliError::Config(
            "sweep grid is empty; set sweep.grid or pass --pair".into(),
        ));
    }
    let inputs = load_inputs(cfg)?;
    ensure_dir(&cfg.out_dir)?;
    let results: Vec<PairResult> = grid
        .par_iter()
        .map(|&(alpha, beta)| {
            let dir = pair_dir(alpha, beta);
            let mut pc = cfg.clone();
            pc.reward.alpha = alpha;
            pc.reward.beta = beta;
            pc.out_dir = cfg.out_dir.join(&dir);
            pc.sweep.grid.clear();
            let run = || -> Result<MetricsReport, CliError> {
                pc.validate()?;
                train_with(&pc, &inputs)?;
                let path = pc.out_dir.join(CHECKPOINT);
                let ckpt = Checkpoint::load(&path)
                    .map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
                backtest_with(&pc, &inputs, &ckpt, &path)
            };
            match run() {
                Ok(m) => PairResult {
                    alpha,
                    beta,
                    dir,
                    metrics: Some(m),
                    error: None,
                },
                Err(e) => {
                    warn(format!("sweep pair alpha={alpha} beta={beta} failed: {e}"));
                    PairResult {
                        alpha,
                        beta,
                        dir,
                        metrics: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();

    let table = sweep_table(&results, cfg.eval.annualize);
    write(&cfg.out_dir.join(COMPARISON), &table)?;
    write(&cfg.out_dir.join(SWEEP_SUMMARY), json(&results))?;
    if results.iter().all(|r| r.metrics.is_none()) {
        return Err(CliError::Run("every sweep pair failed".into()));
    }
    Ok(SweepOutcome { results, table })
}

/// Equity curves in `dir` itself and in its immediate subdirectories,
/// labelled by directory name.
pub fn find_curves(dir: &Path) -> Result<Vec<(String, EquityCurve)>, CliError> {
    let label = |p: &Path| {
        p.file_name()
            .map_or("run".to_string(), |n| n.to_string_lossy().into_owned())
    };
    let mut dirs = vec![dir.to_path_buf()];
    if let Ok(entries) = std::fs::read_dir(dir) {
        let mut subs: Vec<PathBuf> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_dir())
            .collect();
        subs.sort();
        dirs.extend(subs);
    }
    let mut out = Vec::new();
    for d in dirs {
        let path = d.join(EQUITY);
        let Ok(text) = std::fs::read_to_string(&path) else {
            continue;
        };
        let curve = EquityCurve::from_csv(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        out.push((label(&d), curve));
    }
    Ok(out)
}

pub fn report(dir: &Path, benchmark: Option<&Path>) -> Result<String, CliError> {
    let curves = find_curves(dir)?;
    if curves.is_empty() {
        return Err(CliError::Run(format!(
            "no {EQUITY} found in {} or its subdirectories",
            dir.display()
        )));
    }
    let mut series: Vec<Series> = curves
        .iter()
        .map(|(l, c)| Series::cumulative(l, c.dates.clone(), &c.total_assets))
        .collect();

    let first = &curves[0].1;
    let bench = match benchmark {
        Some(path) => match parse_prices(path).and_then(|p| benchmark_closes(&p, &first.dates)) {
            Ok(closes) => Some((first.dates.clone(), closes)),
            Err(e) => {
                warn(format!(
                    "benchmark {}: {e}; chart omits the benchmark",
                    path.display()
                ));
                None
            }
        },
        None => {
            let found = curves
                .iter()
                .find_map(|(_, c)| c.benchmark_growth().map(|g| (c.dates.clone(), g)));
            if found.is_none() {
                warn("no benchmark series in the equity files; chart omits the benchmark");
            }
            found
        }
    };
    if let Some((dates, levels)) = bench {
        series.push(Series {
            dashed: true,
            ..Series::cumulative("benchmark", dates, &levels)
        });
    }
    ensure_dir(dir)?;
    write(
        &dir.join(REPORT_SVG),
        plot::render("Cumulative return", &series),
    )?;

    let reports: Vec<(String, MetricsReport)> = curves
        .iter()
        .map(|(l, c)| {
            c.metrics()
                .map(|m| (l.clone(), m))
                .map_err(|e| CliError::Run(format!("{l}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let cols: Vec<(&str, &MetricsReport)> = reports.iter().map(|(l, m)| (l.as_str(), m)).collect();
    let table = finrl_dapo::metrics::comparison_table(&cols);
    write(&dir.join(REPORT_TXT), &table)?;
    Ok(table)
}
