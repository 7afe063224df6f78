//! Run configuration: a TOML file plus `--set section.key=value` overrides.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use finrl_dapo::{
    BacktestMode, EnvConfig, FillPolicy, OptimizerConfig, PolicyConfig, RewardConfig,
};
use serde::{Deserialize, Deserializer, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Output directory. Paths in the file resolve against the file's
    /// directory; `--out` is taken as given.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs/default")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub prices: PathBuf,
    pub signals: PathBuf,
    /// Single-ticker prices file; without one the backtest compares against
    /// an equal-weight buy-and-hold of the traded universe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<PathBuf>,
    #[serde(default)]
    pub fill: FillPolicy,
    #[serde(
        default,
        deserialize_with = "opt_date",
        skip_serializing_if = "Option::is_none"
    )]
    pub train_start: Option<NaiveDate>,
    #[serde(
        default,
        deserialize_with = "opt_date",
        skip_serializing_if = "Option::is_none"
    )]
    pub train_end: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(deserialize_with = "opt_date", skip_serializing_if = "Option::is_none")]
    pub start: Option<NaiveDate>,
    #[serde(deserialize_with = "opt_date", skip_serializing_if = "Option::is_none")]
    pub end: Option<NaiveDate>,
    pub mode: BacktestMode,
    /// Sampling seed for stochastic backtests.
    pub seed: u64,
    /// Also report the information ratio scaled by √252 in the text table.
    pub annualize: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// `(alpha, beta)` pairs.
    pub grid: Vec<[f64; 2]>,
}

/// Accepts both `"2021-01-04"` and a bare TOML date `2021-01-04`.
fn opt_date<'de, D: Deserializer<'de>>(d: D) -> Result<Option<NaiveDate>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Text(String),
        Toml(toml::value::Datetime),
    }
    let text = match Option::<Repr>::deserialize(d)? {
        None => return Ok(None),
        Some(Repr::Text(s)) => s,
        Some(Repr::Toml(dt)) => dt.to_string(),
    };
    NaiveDate::parse_from_str(text.trim(), "%Y-%m-%d")
        .map(Some)
        .map_err(|e| serde::de::Error::custom(format!("bad date {text:?}: {e}")))
}

/// Parse `section.key=value`. The value is read as a TOML literal when it is
/// one and as a bare string otherwise.
pub fn parse_override(spec: &str) -> Result<(Vec<String>, toml::Value), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set {spec:?}: expected section.key=value")))?;
    let path: Vec<String> = key
        .trim()
        .split('.')
        .map(|s| s.trim().to_string())
        .collect();
    if path.iter().any(String::is_empty) {
        return Err(CliError::Config(format!(
            "--set {spec:?}: empty key segment"
        )));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path, value))
}

pub fn apply_override(
    table: &mut toml::Table,
    path: &[String],
    value: toml::Value,
) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("override path is non-empty");
    let mut cur = table;
    for seg in parents {
        let slot = cur
            .entry(seg.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = slot.as_table_mut().ok_or_else(|| {
            CliError::Config(format!("--set {}: {seg} is not a table", path.join(".")))
        })?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

/// Everything the command line can change about a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub sets: Vec<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Read `path`, apply overrides (which always win), resolve relative
    /// paths against the file's directory and validate.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut table: toml::Table = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for spec in &overrides.sets {
            let (p, v) = parse_override(spec)?;
            apply_override(&mut table, &p, v)?;
        }
        if let Some(seed) = overrides.seed {
            let seed = i64::try_from(seed)
                .map_err(|_| CliError::Config("--seed must fit in i64".into()))?;
            apply_override(
                &mut table,
                &["optimizer".into(), "seed".into()],
                toml::Value::Integer(seed),
            )?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        if let Some(out) = &overrides.out {
            cfg.out_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let abs = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        self.data.prices = abs(&self.data.prices);
        self.data.signals = abs(&self.data.signals);
        self.data.benchmark = self.data.benchmark.as_deref().map(abs);
        self.out_dir = abs(&self.out_dir);
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        self.env.validate().map_err(|e| cfg(&e))?;
        self.reward.validate().map_err(|e| cfg(&e))?;
        self.optimizer.validate().map_err(|e| cfg(&e))?;
        if self.policy.hidden.contains(&0) {
            return Err(CliError::Config("policy.hidden sizes must be >= 1".into()));
        }
        for (s, e, what) in [
            (self.data.train_start, self.data.train_end, "train"),
            (self.eval.start, self.eval.end, "eval"),
        ] {
            if let (Some(s), Some(e)) = (s, e) {
                if s > e {
                    return Err(CliError::Config(format!(
                        "{what} range starts after it ends ({s} > {e})"
                    )));
                }
            }
        }
        let train_given = self.data.train_start.is_some() || self.data.train_end.is_some();
        let eval_given = self.eval.start.is_some() || self.eval.end.is_some();
        if train_given && eval_given {
            let lo = self.data.train_start.max(self.eval.start);
            let hi = match (self.data.train_end, self.eval.end) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            let overlap = match (lo, hi) {
                (Some(lo), Some(hi)) => lo <= hi,
                _ => true,
            };
            if overlap {
                return Err(CliError::Config(
                    "train and eval date ranges overlap".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is representable in TOML")
    }
}
