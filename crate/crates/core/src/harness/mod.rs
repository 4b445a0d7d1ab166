// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end detect-then-test runs and the simulation studies built on
//! them: null calibration, power and p-value correlation.

use serde::{Deserialize, Serialize};

use crate::detect::{ChangeSet, DetectorConfig};
use crate::error::{Error, Result};
use crate::inference::{test_changepoint, ConditionKind, PValueReport, PreparedSeries, TestConfig};
use crate::multiplicity::Correction;
use crate::projection::WindowPolicy;
use crate::rng::derive_seed;
use crate::series::{estimate_sigma_mad, make_alternating_model, simulate_series, MeanModel, NoiseSpec, Series};

mod correlation;
pub mod stats;
mod studies;

pub use correlation::{run_correlation_study, sample_conditional_phi, CorrelationConfig, CorrelationReport, CorrelationRow};
pub use studies::{
    run_null_study, run_power_study, CorrectionSummary, NullStudyReport, PowerRow, PowerStudyReport, QqSeries,
    StudyConfig, MAX_OVERSAMPLING, MIN_NULL_REPLICATES,
};

/// Version of every JSON report produced by this module.
pub const SCHEMA_VERSION: u32 = 1;

/// Simulation scenario: a mean model plus a noise law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub model: MeanModel,
    pub noise: NoiseSpec,
}

impl Scenario {
    pub fn null(len: usize, noise: NoiseSpec) -> Result<Self> {
        Ok(Self {
            model: MeanModel::constant(len, 0.0)?,
            noise,
        })
    }

    /// A single change of size `delta` after `at`.
    pub fn single_change(len: usize, at: usize, delta: f64, noise: NoiseSpec) -> Result<Self> {
        Ok(Self {
            model: MeanModel::new(len, vec![at], vec![0.0, delta])?,
            noise,
        })
    }

    /// `count` equally spaced changes with the mean alternating between
    /// `+amplitude` and `-amplitude`.
    pub fn alternating(len: usize, count: usize, amplitude: f64, noise: NoiseSpec) -> Result<Self> {
        Ok(Self {
            model: make_alternating_model(len, count, amplitude)?,
            noise,
        })
    }

    pub fn truth(&self) -> &[usize] {
        self.model.changepoints()
    }

    pub fn simulate(&self, seed: u64) -> Series {
        simulate_series(&self.model, &self.noise, seed)
    }
}

/// Source of the noise level used by the detector threshold and the test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SigmaMode {
    Known { sigma: f64 },
    /// Median absolute deviation of first differences.
    Mad,
}

impl SigmaMode {
    pub fn resolve(&self, series: &Series) -> Result<f64> {
        match *self {
            SigmaMode::Known { sigma } if sigma.is_finite() && sigma > 0.0 => Ok(sigma),
            SigmaMode::Known { sigma } => Err(Error::invalid(format!("sigma must be positive, got {sigma}"))),
            SigmaMode::Mad => {
                let s = estimate_sigma_mad(series);
                if s > 0.0 && s.is_finite() {
                    Ok(s)
                } else {
                    Err(Error::invalid("MAD noise estimate is zero"))
                }
            }
        }
    }
}

/// Which detected changepoints are tested.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestTarget {
    /// The first changepoint in detection order.
    First,
    /// The first `k` in detection order.
    FirstK(usize),
    #[default]
    All,
}

impl TestTarget {
    /// Targets in increasing index order.
    pub fn select(&self, cs: &ChangeSet) -> Vec<usize> {
        let mut out: Vec<usize> = match *self {
            TestTarget::First => cs.order_found.iter().take(1).copied().collect(),
            TestTarget::FirstK(k) => cs.order_found.iter().take(k).copied().collect(),
            TestTarget::All => cs.indices.clone(),
        };
        out.sort_unstable();
        out
    }
}

/// Settings for [`analyze_series`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Its `noise_scale` is replaced by the resolved sigma.
    pub detector: DetectorConfig,
    pub h: usize,
    pub window_policy: WindowPolicy,
    pub condition: ConditionKind,
    pub n_samples: usize,
    pub sigma: SigmaMode,
    pub alpha: f64,
    pub correction: Correction,
    pub master_seed: u64,
    pub target: TestTarget,
}

impl AnalysisConfig {
    pub fn new(detector: DetectorConfig, h: usize, n_samples: usize, sigma: SigmaMode) -> Self {
        Self {
            detector,
            h,
            window_policy: WindowPolicy::FixedH,
            condition: ConditionKind::ContainsTau,
            n_samples,
            sigma,
            alpha: 0.05,
            correction: Correction::Holm,
            master_seed: 0,
            target: TestTarget::All,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_alpha(self.alpha)?;
        if let SigmaMode::Known { sigma } = self.sigma {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
            }
        }
        self.test_config(1.0, 0).validate()
    }

    /// Per-changepoint test settings for a resolved `sigma`.
    pub fn test_config(&self, sigma: f64, tau: usize) -> TestConfig {
        TestConfig {
            detector: self.detector.clone().with_noise_scale(sigma),
            h: self.h,
            window_policy: self.window_policy,
            condition: self.condition,
            n_samples: self.n_samples,
            sigma,
            master_seed: derive_seed(self.master_seed, &[tau as u64]),
            include_observed: true,
        }
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangepointRecord {
    pub tau_hat: usize,
    /// 0-based position in detection order.
    pub order: usize,
    pub sign: f64,
    pub h1: usize,
    pub h2: usize,
    pub phi_obs: f64,
    pub sd_phi: f64,
    pub p_hat: f64,
    pub p_hat_ratio: f64,
    pub p_adjusted: f64,
    pub significant: bool,
    /// Intervals in the observed sample's selection set.
    pub interval_count: usize,
    pub zero_weight: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedChangepoint {
    pub tau_hat: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub len: usize,
    /// The sigma actually used.
    pub sigma: f64,
    pub config: AnalysisConfig,
    pub detected: ChangeSet,
    pub changepoints: Vec<ChangepointRecord>,
    pub skipped: Vec<SkippedChangepoint>,
    pub significant: usize,
}

/// Detects changepoints, tests the targeted ones and adjusts the p-values
/// for multiplicity. Changepoints whose window does not fit are reported
/// as skipped.
pub fn analyze_series(series: &Series, cfg: &AnalysisConfig) -> Result<AnalysisReport> {
    cfg.validate()?;
    let sigma = cfg.sigma.resolve(series)?;
    let detector = cfg.detector.clone().with_noise_scale(sigma);
    let prep = PreparedSeries::new(series, &detector)?;
    let mut tested: Vec<(usize, PValueReport)> = Vec::new();
    let mut skipped = Vec::new();
    for tau in cfg.target.select(&prep.observed) {
        match test_changepoint(&prep, tau, &cfg.test_config(sigma, tau)) {
            Ok(r) => tested.push((tau, r)),
            Err(Error::InvalidWindow(reason)) => skipped.push(SkippedChangepoint { tau_hat: tau, reason }),
            Err(e) => return Err(e),
        }
    }
    let raw: Vec<f64> = tested.iter().map(|(_, r)| r.p_hat).collect();
    let adjusted = if raw.is_empty() { Vec::new() } else { cfg.correction.apply(&raw)? };
    let observed = &prep.observed;
    let changepoints: Vec<ChangepointRecord> = tested
        .iter()
        .zip(&adjusted)
        .map(|((tau, r), &adj)| {
            let k = observed.indices.binary_search(tau).expect("tested changepoints are detected");
            ChangepointRecord {
                tau_hat: *tau,
                order: observed.order_found.iter().position(|c| c == tau).expect("same set"),
                sign: observed.signs[k],
                h1: r.window.h1,
                h2: r.window.h2,
                phi_obs: r.phi_obs,
                sd_phi: r.sd_phi,
                p_hat: r.p_hat,
                p_hat_ratio: r.p_hat_ratio,
                p_adjusted: adj,
                significant: adj < cfg.alpha,
                interval_count: r.samples[0].selection.len(),
                zero_weight: r.zero_weight,
            }
        })
        .collect();
    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION,
        len: series.len(),
        sigma,
        config: cfg.clone(),
        detected: prep.observed.clone(),
        significant: changepoints.iter().filter(|c| c.significant).count(),
        changepoints,
        skipped,
    })
}
