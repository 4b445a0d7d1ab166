// SPDX-License-Identifier: MIT OR Apache-2.0

//! Subcommand bodies. Option errors are returned as
//! [`ConfigError`](crate::config::ConfigError); any
//! other failure is treated as a data error by `main`.

use anyhow::{Context, Result};
use serde::Serialize;

use cpsi::detect::{Algorithm, ChangeSet, DetectorConfig, Stopping};
use cpsi::harness::{
    analyze_series, run_correlation_study, run_null_study, run_power_study, AnalysisConfig, CorrelationConfig,
    SigmaMode, StudyConfig, TestTarget,
};
use cpsi::series::{estimate_sigma_mad, Series};

use crate::config::{self as cfg, invalid, FileConfig};
use crate::input::{read_series, Column, InputInfo};
use crate::output::{write_csv, write_json};
use crate::{CorrArgs, DetectArgs, StudyCmdArgs, TestArgs};

fn load(input: &cfg::InputArgs, file: &FileConfig) -> Result<(Series, InputInfo)> {
    let column = file.pick(input.column.clone(), "column", "1".to_string())?;
    let (values, info) = read_series(&input.input, Some(&Column::parse(&column)))?;
    let series = Series::new(values).context("invalid series")?;
    Ok((series, info))
}

#[derive(Serialize)]
struct DetectResult {
    len: usize,
    /// Noise scale used by the threshold rule; absent when the rule does
    /// not depend on it and no estimate was available.
    sigma: Option<f64>,
    detector: DetectorConfig,
    changepoints: ChangeSet,
}

#[derive(Serialize)]
struct DetectRow {
    index: usize,
    order: usize,
    sign: f64,
}

pub fn detect(args: &DetectArgs, file: &FileConfig) -> Result<()> {
    let seed = file.pick(args.seed, "seed", 0)?;
    let det = cfg::detector(&args.detector, file, seed, None)?;
    let sigma_mode = cfg::parse_sigma(&file.sigma(args.sigma.clone())?.unwrap_or_else(|| "mad".into()))?;
    let (series, info) = load(&args.input, file)?;
    let scaled = matches!(det.stopping, Stopping::Threshold(_)) && det.algorithm != Algorithm::L0;
    let sigma = match sigma_mode {
        SigmaMode::Known { sigma } => Some(sigma),
        SigmaMode::Mad => Some(estimate_sigma_mad(&series)).filter(|&s| s > 0.0),
    };
    let changepoints = match sigma {
        Some(s) => cpsi::detect::detect(&series, &det.clone().with_noise_scale(s))?,
        None if !scaled => cpsi::detect::detect(&series, &det)?,
        // A zero spread estimate only arises for a (nearly) constant series.
        None if series.values().iter().all(|&v| v == series.values()[0]) => ChangeSet {
            indices: Vec::new(),
            order_found: Vec::new(),
            signs: Vec::new(),
        },
        None => anyhow::bail!("estimated sigma is zero; pass --sigma explicitly"),
    };
    eprintln!("detected {} changepoint(s)", changepoints.len());
    let rows: Vec<DetectRow> = changepoints
        .indices
        .iter()
        .zip(&changepoints.signs)
        .map(|(&index, &sign)| DetectRow {
            index,
            order: changepoints.order_found.iter().position(|&c| c == index).unwrap_or(0),
            sign,
        })
        .collect();
    let result = DetectResult {
        len: series.len(),
        sigma,
        detector: det.with_noise_scale(sigma.unwrap_or(1.0)),
        changepoints,
    };
    write_json(args.output.json.as_deref(), "detect", Some(&info), &result)?;
    write_csv(args.output.csv.as_deref(), &["index", "order", "sign"], rows)
}

pub fn test(args: &TestArgs, file: &FileConfig) -> Result<()> {
    let seed = cfg::seed(&args.inference, file)?;
    let det = cfg::detector(&args.detector, file, seed, None)?;
    let inf = cfg::inference(&args.inference, file, SigmaMode::Mad)?;
    let target = match file.pick_opt(args.target.clone(), "target")? {
        Some(t) => cfg::parse_target(&t)?,
        None => TestTarget::All,
    };
    let mut config = AnalysisConfig::new(det, inf.h, inf.n_samples, inf.sigma);
    config.window_policy = inf.window_policy;
    config.condition = inf.condition;
    config.alpha = inf.alpha;
    config.correction = inf.correction;
    config.master_seed = inf.seed;
    config.target = target;
    config.validate().map_err(invalid)?;

    let (series, info) = load(&args.input, file)?;
    let report = analyze_series(&series, &config)?;
    for s in &report.skipped {
        eprintln!("warning: changepoint {} skipped: {}", s.tau_hat, s.reason);
    }
    eprintln!(
        "tested {} changepoint(s), {} significant after correction",
        report.changepoints.len(),
        report.significant
    );
    let rows = report.changepoints.iter().map(|c| {
        (
            c.tau_hat,
            c.p_hat,
            c.p_adjusted,
            c.order,
            c.sign,
            c.h1,
            c.h2,
            c.phi_obs,
            c.p_hat_ratio,
            c.significant,
            c.interval_count,
            c.zero_weight,
        )
    });
    write_json(args.output.json.as_deref(), "test", Some(&info), &report)?;
    write_csv(
        args.output.csv.as_deref(),
        &[
            "index",
            "p",
            "p_adjusted",
            "order",
            "sign",
            "h1",
            "h2",
            "phi_obs",
            "p_ratio",
            "significant",
            "interval_count",
            "zero_weight",
        ],
        rows,
    )
}

fn study_config(args: &StudyCmdArgs, file: &FileConfig, default_target: TestTarget, changes: usize) -> Result<StudyConfig> {
    let seed = cfg::seed(&args.inference, file)?;
    let scenario = cfg::scenario(&args.scenario, file, 1000, changes)?;
    let det = cfg::detector(&args.detector, file, seed, None)?;
    let truth_sigma = SigmaMode::Known {
        sigma: scenario.noise.std_dev(),
    };
    let inf = cfg::inference(&args.inference, file, truth_sigma)?;
    let study = cfg::study(&args.study, file, default_target)?;
    let mut config = StudyConfig::new(scenario, det, inf.h, study.n_grid, study.replicates);
    config.condition = inf.condition;
    config.sigma = inf.sigma;
    config.master_seed = inf.seed;
    config.alpha = inf.alpha;
    config.target = study.target;
    config.count_retained_only = study.count_retained;
    config.validate().map_err(invalid)?;
    Ok(config)
}

#[derive(Serialize)]
struct QqRow {
    n: usize,
    variant: &'static str,
    rank: usize,
    quantile: f64,
    p: f64,
}

pub fn null_study(args: &StudyCmdArgs, file: &FileConfig) -> Result<()> {
    let config = study_config(args, file, TestTarget::First, 0)?;
    if config.replicates < cpsi::harness::MIN_NULL_REPLICATES {
        return Err(cfg::config_err(format!(
            "a null study needs at least {} replicates",
            cpsi::harness::MIN_NULL_REPLICATES
        )));
    }
    let report = run_null_study(&config)?;
    eprintln!(
        "{} replicates used ({} without detections discarded)",
        report.replicates_used, report.discarded_no_detection
    );
    for q in report.with_observed.iter().chain(&report.without_observed) {
        if let Some(ks) = &q.ks {
            eprintln!(
                "N={:<4} observed={:<5} KS D={:.4} p={:.4}",
                q.n, q.include_observed, ks.statistic, ks.p_value
            );
        }
    }
    let rows = report.with_observed.iter().chain(&report.without_observed).flat_map(|q| {
        let variant = if q.include_observed { "with_observed" } else { "without_observed" };
        q.quantiles
            .iter()
            .zip(&q.p_values)
            .enumerate()
            .map(move |(i, (&quantile, &p))| QqRow {
                n: q.n,
                variant,
                rank: i + 1,
                quantile,
                p,
            })
    });
    write_json(args.output.json.as_deref(), "null-study", None, &report)?;
    write_csv(args.output.csv.as_deref(), &["n", "variant", "rank", "quantile", "p"], rows)
}

pub fn power_study(args: &StudyCmdArgs, file: &FileConfig) -> Result<()> {
    let config = study_config(args, file, TestTarget::All, 1)?;
    let report = run_power_study(&config)?;
    eprintln!(
        "{} replicates used ({} without detections discarded)",
        report.replicates_used, report.discarded_no_detection
    );
    let rows: Vec<_> = report
        .rows
        .iter()
        .map(|r| {
            (
                r.n,
                r.rejection_rate,
                r.first_tested,
                r.raw_rejection_rate,
                r.tests,
                r.holm.mean_true_positives,
                r.holm.mean_false_positives,
                r.holm.fwer,
                r.holm.fdr,
                r.bh.mean_true_positives,
                r.bh.mean_false_positives,
                r.bh.fwer,
                r.bh.fdr,
            )
        })
        .collect();
    for r in &report.rows {
        eprintln!(
            "N={:<4} rejection={:.3} holm TP={:.3} FP={:.3} bh TP={:.3} FP={:.3}",
            r.n,
            r.rejection_rate,
            r.holm.mean_true_positives,
            r.holm.mean_false_positives,
            r.bh.mean_true_positives,
            r.bh.mean_false_positives
        );
    }
    write_json(args.output.json.as_deref(), "power-study", None, &report)?;
    write_csv(
        args.output.csv.as_deref(),
        &[
            "n",
            "rejection_rate",
            "first_tested",
            "raw_rejection_rate",
            "tests",
            "holm_mean_tp",
            "holm_mean_fp",
            "holm_fwer",
            "holm_fdr",
            "bh_mean_tp",
            "bh_mean_fp",
            "bh_fwer",
            "bh_fdr",
        ],
        rows,
    )
}

pub fn corr_study(args: &CorrArgs, file: &FileConfig) -> Result<()> {
    let seed = cfg::seed(&args.inference, file)?;
    let scenario = cfg::scenario(&args.scenario, file, 400, 3)?;
    let changes = scenario.truth().len();
    let det = cfg::detector(&args.detector, file, seed, Some(Stopping::FixedCount(changes.max(1))))?;
    let sigma = SigmaMode::Known {
        sigma: scenario.noise.std_dev(),
    };
    let inf = cfg::inference(&args.inference, file, sigma)?;
    let config = CorrelationConfig {
        scenario,
        detector: det,
        h: inf.h,
        n_samples: inf.n_samples,
        sigma: inf.sigma,
        condition: inf.condition,
        resamples: file.pick(args.resamples, "resamples", 1000)?,
        master_seed: inf.seed,
    };
    if config.resamples < 2 {
        return Err(cfg::config_err("need at least two resamples"));
    }
    let report = run_correlation_study(&config)?;
    eprintln!("changepoints {:?}", report.changepoints);
    let rows: Vec<_> = report
        .rows
        .iter()
        .flat_map(|row| {
            row.pairs
                .iter()
                .map(move |p| (row.interest, p.a, p.b, p.rho, p.resamples_used))
        })
        .collect();
    write_json(args.output.json.as_deref(), "corr-study", None, &report)?;
    write_csv(args.output.csv.as_deref(), &["interest", "a", "b", "rho", "resamples_used"], rows)
}
