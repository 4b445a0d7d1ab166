// SPDX-License-Identifier: MIT OR Apache-2.0

//! `cpsi`: detect changepoints in a series and attach post-selection
//! p-values, or run the simulation studies.
//!
//! Exit status is 0 on success, 2 for invalid options or config files and
//! 3 for unreadable or unusable data.

#![forbid(unsafe_code)]

mod commands;
mod config;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{
    config_err, ConfigError, DetectorArgs, FileConfig, InferenceArgs, InputArgs, OutputArgs, ScenarioArgs, StudyArgs,
};

#[derive(Parser, Debug)]
#[command(name = "cpsi", version, about = "Post-selection inference for changepoints in the mean")]
struct Cli {
    /// TOML file of defaults; keys are option names with `_` for `-`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads [default: all cores].
    #[arg(long, global = true, env = "CPSI_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detect changepoints.
    Detect(DetectArgs),
    /// Detect changepoints and compute p-values for them.
    Test(TestArgs),
    /// p-value calibration under no change, per Monte Carlo size.
    NullStudy(StudyCmdArgs),
    /// Rejection rates and error accounting with true changes.
    PowerStudy(StudyCmdArgs),
    /// Correlation between p-values when one changepoint is perturbed.
    CorrStudy(CorrArgs),
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Noise standard deviation for the threshold, or `mad` [default: mad].
    #[arg(long)]
    sigma: Option<String>,
    /// Seed for WBS intervals [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct TestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    #[command(flatten)]
    inference: InferenceArgs,
    /// `all`, `first` or `first:<k>` in detection order [default: all].
    #[arg(long)]
    target: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct StudyCmdArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    #[command(flatten)]
    inference: InferenceArgs,
    #[command(flatten)]
    study: StudyArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct CorrArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    #[command(flatten)]
    inference: InferenceArgs,
    /// Number of resamples of the perturbed changepoint [default: 1000].
    #[arg(long)]
    resamples: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(config_err("thread count must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_err(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_threads(cli.threads)?;
    let file = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Detect(a) => commands::detect(a, &file),
        Command::Test(a) => commands::test(a, &file),
        Command::NullStudy(a) => commands::null_study(a, &file),
        Command::PowerStudy(a) => commands::power_study(a, &file),
        Command::CorrStudy(a) => commands::corr_study(a, &file),
    }
}

fn main() -> ExitCode {
    // clap reports usage errors itself with status 2.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = if e.downcast_ref::<ConfigError>().is_some() { 2 } else { 3 };
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
