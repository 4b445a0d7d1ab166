// SPDX-License-Identifier: MIT OR Apache-2.0

//! Python bindings. Reports are handed over as the same JSON documents the
//! command-line tool writes, decoded into plain dicts.

#![forbid(unsafe_code)]

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use cpsi::detect::{DetectorConfig, Stopping, DEFAULT_WBS_INTERVALS};
use cpsi::harness::{analyze_series, AnalysisConfig, SigmaMode};
use cpsi::inference::ConditionKind;
use cpsi::multiplicity::Correction;
use cpsi::series::Series;

fn value_error(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Builds a detector from keyword-style options. Without a stopping rule
/// BS and WBS use threshold 3; L0 needs one.
pub fn detector_config(
    algorithm: &str,
    changepoints: Option<usize>,
    threshold: Option<f64>,
    wbs_intervals: usize,
    seed: u64,
) -> Result<DetectorConfig, String> {
    let stopping = match (changepoints, threshold) {
        (Some(_), Some(_)) => return Err("give either changepoints or threshold, not both".into()),
        (Some(k), None) => Stopping::FixedCount(k),
        (None, Some(t)) => Stopping::Threshold(t),
        (None, None) if algorithm == "l0" => return Err("l0 needs a threshold (penalty) or changepoints".into()),
        (None, None) => Stopping::Threshold(3.0),
    };
    let det = match algorithm {
        "bs" => DetectorConfig::bs(stopping),
        "wbs" => DetectorConfig::wbs(stopping, wbs_intervals, seed),
        "l0" => DetectorConfig {
            stopping,
            ..DetectorConfig::l0(1.0)
        },
        other => return Err(format!("unknown algorithm '{other}'; use bs, wbs or l0")),
    };
    det.validate().map_err(|e| e.to_string())?;
    Ok(det)
}

pub fn correction(name: &str) -> Result<Correction, String> {
    match name {
        "holm" => Ok(Correction::Holm),
        "bh" => Ok(Correction::Bh),
        "none" => Ok(Correction::None),
        other => Err(format!("unknown correction '{other}'; use holm, bh or none")),
    }
}

fn sigma_mode(sigma: Option<f64>) -> SigmaMode {
    sigma.map_or(SigmaMode::Mad, |sigma| SigmaMode::Known { sigma })
}

/// Robust noise standard deviation from first differences.
#[pyfunction]
fn estimate_sigma_mad(values: Vec<f64>) -> PyResult<f64> {
    let series = Series::new(values).map_err(value_error)?;
    Ok(cpsi::series::estimate_sigma_mad(&series))
}

/// Detected changepoints, sorted. A changepoint `t` splits the series
/// after its `t`-th value.
#[pyfunction]
#[pyo3(signature = (values, *, algorithm = "bs", changepoints = None, threshold = None, sigma = None,
                    wbs_intervals = DEFAULT_WBS_INTERVALS, seed = 0))]
fn detect(
    values: Vec<f64>,
    algorithm: &str,
    changepoints: Option<usize>,
    threshold: Option<f64>,
    sigma: Option<f64>,
    wbs_intervals: usize,
    seed: u64,
) -> PyResult<Vec<usize>> {
    let series = Series::new(values).map_err(value_error)?;
    let det = detector_config(algorithm, changepoints, threshold, wbs_intervals, seed).map_err(value_error)?;
    let sigma = sigma_mode(sigma).resolve(&series).map_err(value_error)?;
    let cs = cpsi::detect::detect(&series, &det.with_noise_scale(sigma)).map_err(value_error)?;
    Ok(cs.indices)
}

/// Detects changepoints and tests each one; returns the report as a dict.
/// `sigma=None` estimates the noise level from the data.
#[pyfunction]
#[pyo3(signature = (values, *, h = 10, n_samples = 10, sigma = None, algorithm = "bs", changepoints = None,
                    threshold = None, wbs_intervals = DEFAULT_WBS_INTERVALS, alpha = 0.05,
                    correction = "holm", exact_match = false, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn analyze<'py>(
    py: Python<'py>,
    values: Vec<f64>,
    h: usize,
    n_samples: usize,
    sigma: Option<f64>,
    algorithm: &str,
    changepoints: Option<usize>,
    threshold: Option<f64>,
    wbs_intervals: usize,
    alpha: f64,
    correction: &str,
    exact_match: bool,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let series = Series::new(values).map_err(value_error)?;
    let det = detector_config(algorithm, changepoints, threshold, wbs_intervals, seed).map_err(value_error)?;
    let mut cfg = AnalysisConfig::new(det, h, n_samples, sigma_mode(sigma));
    cfg.alpha = alpha;
    cfg.correction = self::correction(correction).map_err(value_error)?;
    cfg.master_seed = seed;
    if exact_match {
        cfg.condition = ConditionKind::ExactMatch;
    }
    let report = py
        .detach(|| analyze_series(&series, &cfg))
        .map_err(value_error)?;
    let text = serde_json::to_string(&report).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Multiplicity-adjusted p-values in input order.
#[pyfunction]
#[pyo3(signature = (p_values, method = "holm"))]
fn adjust_p_values(p_values: Vec<f64>, method: &str) -> PyResult<Vec<f64>> {
    correction(method)
        .map_err(value_error)?
        .apply(&p_values)
        .map_err(value_error)
}

#[pymodule]
fn cpsi_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("SCHEMA_VERSION", cpsi::harness::SCHEMA_VERSION)?;
    m.add_function(wrap_pyfunction!(estimate_sigma_mad, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(adjust_p_values, m)?)?;
    Ok(())
}
