// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dependence between p-values at distinct changepoints: resample `phi`
//! at one changepoint from its conditional law, re-run detection on the
//! rebuilt series and re-test every changepoint.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::pearson;
use super::{Scenario, SigmaMode, SCHEMA_VERSION};
use crate::detect::{DetectorConfig, Stopping};
use crate::error::{Error, Result};
use crate::inference::{
    evaluate_sample, setup_test, test_changepoint, ConditionKind, PhiLaw, PreparedSeries, PsiSource, TestConfig,
};
use crate::normal::{log_interval_prob, log_sum_exp};
use crate::projection::{reconstruct, PhiPsiCoords, Window, WindowPolicy};
use crate::rng::{derive_seed, stream};
use crate::selection::PhiIntervalUnion;
use crate::series::NoiseSpec;

/// Draws `phi ~ N(0, sd^2)` restricted to `set`, by picking an interval in
/// proportion to its mass and inverting the normal CDF within it.
pub fn sample_conditional_phi<R: Rng + ?Sized>(law: &PhiLaw, set: &PhiIntervalUnion, rng: &mut R) -> Result<f64> {
    let ivs: Vec<(f64, f64)> = set.intervals().iter().map(|iv| (iv.lo / law.sd, iv.hi / law.sd)).collect();
    let log_mass: Vec<f64> = ivs.iter().map(|&(a, b)| log_interval_prob(a, b)).collect();
    let total = log_sum_exp(log_mass.iter().copied());
    if total == f64::NEG_INFINITY {
        return Err(Error::invalid("conditioning set has zero probability"));
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut pick = ivs.len() - 1;
    for (k, lm) in log_mass.iter().enumerate() {
        acc += (lm - total).exp();
        if u < acc {
            pick = k;
            break;
        }
    }
    let (a, b) = ivs[pick];
    let target = rng.random::<f64>().max(f64::MIN_POSITIVE).ln() + log_mass[pick];
    // Bisection on ln P(a <= Z <= x); 40 sd beyond the finite end is
    // outside double-precision reach.
    let mut lo = if a.is_finite() { a } else { b.min(0.0) - 40.0 };
    let mut hi = if b.is_finite() { b } else { a.max(0.0) + 40.0 };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if log_interval_prob(a, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) * law.sd)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationConfig {
    pub scenario: Scenario,
    pub detector: DetectorConfig,
    pub h: usize,
    pub n_samples: usize,
    pub sigma: SigmaMode,
    pub condition: ConditionKind,
    pub resamples: usize,
    pub master_seed: u64,
}

impl CorrelationConfig {
    /// `T = 400`, changes at 100, 200 and 300 with the mean alternating
    /// between +1 and -1, binary segmentation with three changepoints.
    pub fn three_change_design(n_samples: usize, resamples: usize, master_seed: u64) -> Result<Self> {
        Ok(Self {
            scenario: Scenario::alternating(400, 3, 1.0, NoiseSpec::gaussian(1.0)?)?,
            detector: DetectorConfig::bs(Stopping::FixedCount(3)),
            h: 10,
            n_samples,
            sigma: SigmaMode::Known { sigma: 1.0 },
            condition: ConditionKind::ContainsTau,
            resamples,
            master_seed,
        })
    }

    fn test_config(&self, sigma: f64, seed: u64) -> TestConfig {
        TestConfig {
            detector: self.detector.clone().with_noise_scale(sigma),
            h: self.h,
            window_policy: WindowPolicy::FixedH,
            condition: self.condition,
            n_samples: self.n_samples,
            sigma,
            master_seed: seed,
            include_observed: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub a: usize,
    pub b: usize,
    /// `None` when fewer than two resamples test both or one is constant.
    pub rho: Option<f64>,
    pub resamples_used: usize,
}

/// Correlations when `phi` is resampled at `interest`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub interest: usize,
    pub pairs: Vec<PairCorrelation>,
    /// Resamples in which each changepoint was not re-detected.
    pub missing: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub schema_version: u32,
    pub config: CorrelationConfig,
    pub sigma: f64,
    pub changepoints: Vec<usize>,
    pub rows: Vec<CorrelationRow>,
}

pub fn run_correlation_study(cfg: &CorrelationConfig) -> Result<CorrelationReport> {
    if cfg.resamples < 2 {
        return Err(Error::invalid("need at least two resamples"));
    }
    let series = cfg.scenario.simulate(derive_seed(cfg.master_seed, &[0]));
    let sigma = cfg.sigma.resolve(&series)?;
    cfg.test_config(sigma, 0).validate()?;
    let detector = cfg.detector.clone().with_noise_scale(sigma);
    let prep = PreparedSeries::new(&series, &detector)?;
    let cps = prep.observed.indices.clone();
    if cps.len() < 2 {
        return Err(Error::invalid(format!(
            "correlation study needs at least two detected changepoints, found {}",
            cps.len()
        )));
    }
    let windows: Vec<Window> = (0..cps.len())
        .map(|j| Window::for_changepoint(&cps, j, cfg.h, WindowPolicy::FixedH, series.len()))
        .collect::<Result<_>>()?;
    for w in windows.windows(2) {
        if w[0].end() > w[1].start() {
            return Err(Error::invalid(format!(
                "windows around {} and {} overlap; reduce h",
                w[0].tau_hat, w[1].tau_hat
            )));
        }
    }

    let mut rows = Vec::with_capacity(cps.len());
    for (i, &interest) in cps.iter().enumerate() {
        let tcfg = cfg.test_config(sigma, derive_seed(cfg.master_seed, &[1, i as u64]));
        let setup = setup_test(&prep, interest, &tcfg)?;
        let observed = evaluate_sample(&prep, &setup, 0, PsiSource::Observed, &setup.psi_obs)?;
        let p: Vec<Vec<Option<f64>>> = (0..cfg.resamples)
            .into_par_iter()
            .map(|r| -> Result<Vec<Option<f64>>> {
                let mut rng = stream(cfg.master_seed, &[2, i as u64, r as u64]);
                let phi = sample_conditional_phi(&setup.law, &observed.selection, &mut rng)?;
                let coords = PhiPsiCoords {
                    phi,
                    psi: setup.psi_obs.clone(),
                };
                let x = reconstruct(&coords, &setup.basis, &setup.contrast)?;
                let resampled = PreparedSeries::new(&x, &detector)?;
                cps.iter()
                    .enumerate()
                    .map(|(k, &tau)| {
                        if !resampled.observed.contains(tau) {
                            return Ok(None);
                        }
                        let seed = derive_seed(cfg.master_seed, &[3, i as u64, r as u64, k as u64]);
                        Ok(Some(test_changepoint(&resampled, tau, &cfg.test_config(sigma, seed))?.p_hat))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let missing = (0..cps.len()).map(|k| p.iter().filter(|row| row[k].is_none()).count()).collect();
        let mut pairs = Vec::new();
        for a in 0..cps.len() {
            for b in a + 1..cps.len() {
                let (xa, xb): (Vec<f64>, Vec<f64>) = p.iter().filter_map(|row| Some((row[a]?, row[b]?))).unzip();
                pairs.push(PairCorrelation {
                    a: cps[a],
                    b: cps[b],
                    rho: pearson(&xa, &xb),
                    resamples_used: xa.len(),
                });
            }
        }
        rows.push(CorrelationRow {
            interest,
            pairs,
            missing,
        });
    }
    Ok(CorrelationReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        sigma,
        changepoints: cps,
        rows,
    })
}
