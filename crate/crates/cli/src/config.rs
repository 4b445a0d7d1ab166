// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line options, the optional config file and their merge.
//!
//! The config file is flat TOML whose keys are the long option names with
//! dashes replaced by underscores, for example:
//!
//! ```toml
//! algorithm = "bs"
//! threshold = 3.0
//! h = 10
//! n_samples = 10
//! sigma = "mad"
//! correction = "holm"
//! ```
//!
//! A flag given on the command line always wins over the file.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;

use cpsi::detect::{DetectorConfig, Stopping};
use cpsi::harness::{Scenario, SigmaMode, TestTarget};
use cpsi::inference::ConditionKind;
use cpsi::multiplicity::Correction;
use cpsi::projection::WindowPolicy;
use cpsi::series::NoiseSpec;

/// Invalid options or config file; exits with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Maps a library validation error to a config error.
pub fn invalid(e: cpsi::Error) -> anyhow::Error {
    config_err(e.to_string())
}

const KNOWN_KEYS: &[&str] = &[
    "column",
    "algorithm",
    "changepoints",
    "threshold",
    "wbs_intervals",
    "wbs_seed",
    "h",
    "window_policy",
    "condition",
    "n_samples",
    "sigma",
    "alpha",
    "correction",
    "seed",
    "length",
    "changes",
    "delta",
    "noise",
    "replicates",
    "n_grid",
    "target",
    "count_retained",
    "resamples",
];

/// Parsed config file.
#[derive(Debug, Default)]
pub struct FileConfig {
    table: toml::Table,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config file {}: {e}", path.display())))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| config_err(format!("{e}")))?;
        if let Some(bad) = table.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(config_err(format!("unknown config key '{bad}'")));
        }
        Ok(Self { table })
    }

    fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        self.table
            .get(key)
            .map(|v| v.clone().try_into::<T>())
            .transpose()
            .map_err(|e| config_err(format!("config key '{key}': {e}")))
    }

    /// Sigma may be written as a number or as the string `mad`.
    pub fn sigma(&self, flag: Option<String>) -> Result<Option<String>> {
        if flag.is_some() {
            return Ok(flag);
        }
        Ok(match self.table.get("sigma") {
            None => None,
            Some(toml::Value::Float(v)) => Some(v.to_string()),
            Some(toml::Value::Integer(v)) => Some(v.to_string()),
            Some(toml::Value::String(s)) => Some(s.clone()),
            Some(other) => return Err(config_err(format!("config key 'sigma': unexpected {}", other.type_str()))),
        })
    }

    /// Enumerated values are written as their command-line spelling.
    fn get_enum<T: ValueEnum>(&self, key: &str) -> Result<Option<T>> {
        self.get::<String>(key)?
            .map(|s| T::from_str(&s, true).map_err(|e| config_err(format!("config key '{key}': {e}"))))
            .transpose()
    }

    /// Flag, else file, else `default`.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    pub fn pick_opt<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        Ok(match flag {
            Some(v) => Some(v),
            None => self.get(key)?,
        })
    }

    fn pick_enum<T: ValueEnum>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(match flag {
            Some(v) => v,
            None => self.get_enum(key)?.unwrap_or(default),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Bs,
    Wbs,
    L0,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Fixed,
    Truncate,
    Between,
    Midpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConditionArg {
    Contains,
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CorrectionArg {
    Holm,
    Bh,
    None,
}

#[derive(Args, Debug, Default)]
pub struct InputArgs {
    /// CSV or plain-text file, one observation per row; `-` reads stdin.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Column to read: 1-based index or header name [default: 1].
    #[arg(long)]
    pub column: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct DetectorArgs {
    /// Detection algorithm [default: bs].
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmArg>,
    /// Stop after this many changepoints.
    #[arg(long, conflicts_with = "threshold")]
    pub changepoints: Option<usize>,
    /// BS/WBS: |CUSUM| threshold in units of sigma [default: 3]. L0: penalty.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Number of random WBS intervals [default: 100].
    #[arg(long)]
    pub wbs_intervals: Option<usize>,
    /// Seed for the WBS intervals [default: --seed].
    #[arg(long)]
    pub wbs_seed: Option<u64>,
}

#[derive(Args, Debug, Default)]
pub struct InferenceArgs {
    /// Half-window size [default: 10].
    #[arg(long)]
    pub h: Option<usize>,
    /// Window choice around each changepoint [default: fixed].
    #[arg(long, value_enum)]
    pub window_policy: Option<PolicyArg>,
    /// Selection event to condition on [default: contains].
    #[arg(long, value_enum)]
    pub condition: Option<ConditionArg>,
    /// Monte Carlo samples N [default: 10].
    #[arg(long, short = 'n')]
    pub n_samples: Option<usize>,
    /// Noise standard deviation, or `mad` to estimate it.
    #[arg(long)]
    pub sigma: Option<String>,
    /// Significance level [default: 0.05].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Multiplicity correction [default: holm].
    #[arg(long, value_enum)]
    pub correction: Option<CorrectionArg>,
    /// Master seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Default)]
pub struct ScenarioArgs {
    /// Series length T [default: 1000].
    #[arg(long)]
    pub length: Option<usize>,
    /// Number of equally spaced changes, mean alternating [default: 0].
    #[arg(long)]
    pub changes: Option<usize>,
    /// Size of each change [default: 2].
    #[arg(long)]
    pub delta: Option<f64>,
    /// `gaussian[:sigma]`, `t:<dof>` or `laplace:<scale>` [default: gaussian].
    #[arg(long)]
    pub noise: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct StudyArgs {
    /// Number of replicates [default: 1000].
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Comma-separated Monte Carlo sizes [default: 1,5,10].
    #[arg(long)]
    pub n_grid: Option<String>,
    /// `first`, `all` or `first:<k>` [default: first for null studies, all
    /// for power studies].
    #[arg(long)]
    pub target: Option<String>,
    /// Count only replicates with detections towards --replicates.
    #[arg(long)]
    pub count_retained: bool,
}

#[derive(Args, Debug, Default)]
pub struct OutputArgs {
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// CSV table path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn parse_sigma(s: &str) -> Result<SigmaMode> {
    if s.eq_ignore_ascii_case("mad") {
        return Ok(SigmaMode::Mad);
    }
    match s.parse::<f64>() {
        Ok(sigma) if sigma.is_finite() && sigma > 0.0 => Ok(SigmaMode::Known { sigma }),
        _ => Err(config_err(format!("sigma must be a positive number or 'mad', got '{s}'"))),
    }
}

pub fn parse_noise(s: &str) -> Result<NoiseSpec> {
    let (family, param) = match s.split_once(':') {
        Some((f, p)) => {
            let v: f64 = p
                .parse()
                .map_err(|_| config_err(format!("noise parameter '{p}' is not a number")))?;
            (f, Some(v))
        }
        None => (s, None),
    };
    match (family.to_ascii_lowercase().as_str(), param) {
        ("gaussian" | "normal", p) => NoiseSpec::gaussian(p.unwrap_or(1.0)),
        ("t" | "student", Some(dof)) => NoiseSpec::student_t(dof),
        ("laplace", p) => NoiseSpec::laplace(p.unwrap_or(1.0)),
        _ => return Err(config_err(format!("unknown noise '{s}'; use gaussian[:sd], t:<dof> or laplace:<scale>"))),
    }
    .map_err(invalid)
}

pub fn parse_n_grid(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| config_err(format!("bad N '{p}' in grid")))
        })
        .collect()
}

pub fn parse_target(s: &str) -> Result<TestTarget> {
    match s {
        "first" => Ok(TestTarget::First),
        "all" => Ok(TestTarget::All),
        _ => s
            .strip_prefix("first:")
            .and_then(|k| k.parse().ok())
            .filter(|&k| k >= 1)
            .map(TestTarget::FirstK)
            .ok_or_else(|| config_err(format!("target must be first, all or first:<k>, got '{s}'"))),
    }
}

/// Resolves the detector. Without a stopping rule, `fallback` is used when
/// given; otherwise BS and WBS stop at threshold 3 and L0 is an error.
pub fn detector(
    args: &DetectorArgs,
    file: &FileConfig,
    seed: u64,
    fallback: Option<Stopping>,
) -> Result<DetectorConfig> {
    let algorithm = file.pick_enum(args.algorithm, "algorithm", AlgorithmArg::Bs)?;
    let (count, threshold) = if args.changepoints.is_some() || args.threshold.is_some() {
        (args.changepoints, args.threshold)
    } else {
        (file.get::<usize>("changepoints")?, file.get::<f64>("threshold")?)
    };
    let stopping = match (count, threshold) {
        (Some(_), Some(_)) => return Err(config_err("give either changepoints or threshold, not both")),
        (Some(k), None) => Stopping::FixedCount(k),
        (None, Some(t)) => Stopping::Threshold(t),
        (None, None) => match (fallback, algorithm) {
            (Some(s), _) => s,
            (None, AlgorithmArg::L0) => {
                return Err(config_err("l0 needs --threshold (penalty) or --changepoints"))
            }
            (None, _) => Stopping::Threshold(3.0),
        },
    };
    let det = match algorithm {
        AlgorithmArg::Bs => DetectorConfig::bs(stopping),
        AlgorithmArg::Wbs => DetectorConfig::wbs(
            stopping,
            file.pick(args.wbs_intervals, "wbs_intervals", cpsi::detect::DEFAULT_WBS_INTERVALS)?,
            file.pick(args.wbs_seed, "wbs_seed", seed)?,
        ),
        AlgorithmArg::L0 => DetectorConfig {
            stopping,
            ..DetectorConfig::l0(1.0)
        },
    };
    det.validate().map_err(invalid)?;
    Ok(det)
}

/// Inference settings shared by the test and study commands.
#[derive(Clone, Debug)]
pub struct Inference {
    pub h: usize,
    pub window_policy: WindowPolicy,
    pub condition: ConditionKind,
    pub n_samples: usize,
    pub sigma: SigmaMode,
    pub alpha: f64,
    pub correction: Correction,
    pub seed: u64,
}

pub fn seed(args: &InferenceArgs, file: &FileConfig) -> Result<u64> {
    file.pick(args.seed, "seed", 0)
}

pub fn inference(args: &InferenceArgs, file: &FileConfig, default_sigma: SigmaMode) -> Result<Inference> {
    let sigma = match file.sigma(args.sigma.clone())? {
        Some(s) => parse_sigma(&s)?,
        None => default_sigma,
    };
    let window_policy = match file.pick_enum(args.window_policy, "window_policy", PolicyArg::Fixed)? {
        PolicyArg::Fixed => WindowPolicy::FixedH,
        PolicyArg::Truncate => WindowPolicy::TruncateAtNeighbors,
        PolicyArg::Between => WindowPolicy::BetweenNeighbors,
        PolicyArg::Midpoint => WindowPolicy::Midpoint,
    };
    let condition = match file.pick_enum(args.condition, "condition", ConditionArg::Contains)? {
        ConditionArg::Contains => ConditionKind::ContainsTau,
        ConditionArg::Exact => ConditionKind::ExactMatch,
    };
    let correction = match file.pick_enum(args.correction, "correction", CorrectionArg::Holm)? {
        CorrectionArg::Holm => Correction::Holm,
        CorrectionArg::Bh => Correction::Bh,
        CorrectionArg::None => Correction::None,
    };
    Ok(Inference {
        h: file.pick(args.h, "h", 10)?,
        window_policy,
        condition,
        n_samples: file.pick(args.n_samples, "n_samples", 10)?,
        sigma,
        alpha: file.pick(args.alpha, "alpha", 0.05)?,
        correction,
        seed: seed(args, file)?,
    })
}

/// Simulation scenario with the given default length and change count.
pub fn scenario(args: &ScenarioArgs, file: &FileConfig, len: usize, changes: usize) -> Result<Scenario> {
    let len = file.pick(args.length, "length", len)?;
    let changes = file.pick(args.changes, "changes", changes)?;
    let delta = file.pick(args.delta, "delta", 2.0)?;
    let noise = parse_noise(&file.pick(args.noise.clone(), "noise", "gaussian".to_string())?)?;
    if changes == 0 {
        Scenario::null(len, noise)
    } else {
        Scenario::alternating(len, changes, delta / 2.0, noise)
    }
    .map_err(invalid)
}

pub struct Study {
    pub replicates: usize,
    pub n_grid: Vec<usize>,
    pub target: TestTarget,
    pub count_retained: bool,
}

pub fn study(args: &StudyArgs, file: &FileConfig, default_target: TestTarget) -> Result<Study> {
    let target = match file.pick_opt(args.target.clone(), "target")? {
        Some(t) => parse_target(&t)?,
        None => default_target,
    };
    Ok(Study {
        replicates: file.pick(args.replicates, "replicates", 1000)?,
        n_grid: parse_n_grid(&file.pick(args.n_grid.clone(), "n_grid", "1,5,10".to_string())?)?,
        target,
        count_retained: args.count_retained || file.get("count_retained")?.unwrap_or(false),
    })
}
