// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte Carlo post-selection p-values.
//!
//! For a detected changepoint the test statistic is `phi = nu^T X`. Given
//! the data outside the test window and the window mean, the remaining
//! within-window variation `psi` is a nuisance. For each of `N` values of
//! `psi` (the observed one first, the rest drawn from their null law) the
//! selection set `S_psi` gives a weight `w = P(phi in S_psi)` and a
//! truncated-Gaussian p-value `p = P(|phi| >= |phi_obs|, phi in S_psi) / w`.
//! The estimate is the weighted average `sum w p / sum w`; keeping the
//! observed `psi` among the samples makes it exactly uniform under the
//! null for every `N`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{ChangeSet, DetectorConfig, PreparedDetector};
use crate::error::{Error, Result};
use crate::normal::{clamp_prob, log_interval_prob, log_sum_exp};
use crate::projection::{build_contrast, build_nuisance_basis, decompose, Contrast, NuisanceBasis, Window, WindowPolicy};
use crate::rng;
use crate::selection::{selection_domain, selection_set, PhiInterval, PhiIntervalUnion, SelectionCondition};
use crate::series::Series;

/// Null law of `phi`: centred normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiLaw {
    pub sd: f64,
}

impl PhiLaw {
    pub fn new(sd: f64) -> Result<Self> {
        if !(sd.is_finite() && sd > 0.0) {
            return Err(Error::invalid(format!("phi sd must be positive and finite, got {sd}")));
        }
        Ok(Self { sd })
    }

    /// `sigma * sqrt(1/h1 + 1/h2)`.
    pub fn for_window(sigma: f64, window: &Window) -> Result<Self> {
        Self::new(sigma * (1.0 / window.h1 as f64 + 1.0 / window.h2 as f64).sqrt())
    }

    /// `ln P(phi in u)`.
    pub fn log_prob(&self, u: &PhiIntervalUnion) -> f64 {
        log_sum_exp(
            u.intervals()
                .iter()
                .map(|iv| log_interval_prob(iv.lo / self.sd, iv.hi / self.sd)),
        )
    }
}

/// `P(phi in u)`.
pub fn interval_union_prob(law: &PhiLaw, u: &PhiIntervalUnion) -> f64 {
    clamp_prob(law.log_prob(u).exp())
}

/// `P(phi in u, |phi| >= c)`.
pub fn exceedance_prob(law: &PhiLaw, u: &PhiIntervalUnion, c: f64) -> f64 {
    interval_union_prob(law, &u.intersect(&PhiIntervalUnion::two_sided_tails(c)))
}

/// Weight and conditional p-value for one selection set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleProb {
    /// `P(phi in S)`, zero below the reporting floor.
    pub w: f64,
    /// `P(|phi| >= c | phi in S)`; `None` when `S` has no mass.
    pub p: Option<f64>,
    #[serde(skip)]
    pub log_w: f64,
    /// `ln P(phi in S, |phi| >= c)`.
    #[serde(skip)]
    pub log_e: f64,
}

pub fn p_for_sample(law: &PhiLaw, s: &PhiIntervalUnion, c: f64) -> SampleProb {
    let log_w = law.log_prob(s);
    let log_e = law.log_prob(&s.intersect(&PhiIntervalUnion::two_sided_tails(c.abs())));
    let p = (log_w > f64::NEG_INFINITY).then(|| (log_e - log_w).exp().min(1.0));
    SampleProb {
        w: clamp_prob(log_w.exp()),
        p,
        log_w,
        log_e,
    }
}

/// Which event the p-value conditions on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    /// The tested changepoint is detected.
    #[default]
    ContainsTau,
    /// The full set of detections is reproduced.
    ExactMatch,
}

/// Settings for one p-value computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub detector: DetectorConfig,
    /// Half-window size before the policy is applied.
    pub h: usize,
    pub window_policy: WindowPolicy,
    /// Window policies other than `FixedH` always use exact matching.
    pub condition: ConditionKind,
    /// Monte Carlo sample size `N >= 1`.
    pub n_samples: usize,
    /// Known noise standard deviation.
    pub sigma: f64,
    pub master_seed: u64,
    /// Use the observed `psi` as the first sample. Turning this off gives
    /// an estimator that is not a valid p-value; it exists for comparison.
    pub include_observed: bool,
}

impl TestConfig {
    pub fn new(detector: DetectorConfig, h: usize, n_samples: usize, sigma: f64, master_seed: u64) -> Self {
        Self {
            detector,
            h,
            window_policy: WindowPolicy::FixedH,
            condition: ConditionKind::ContainsTau,
            n_samples,
            sigma,
            master_seed,
            include_observed: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        if self.h == 0 {
            return Err(Error::invalid("h must be >= 1"));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("N must be >= 1"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    fn effective_condition(&self) -> ConditionKind {
        if self.window_policy.needs_exact_match() {
            ConditionKind::ExactMatch
        } else {
            self.condition
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiSource {
    Observed,
    /// Drawn from the stream `(master_seed, [stream])`.
    Simulated { stream: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    /// Position in the estimator, from 0.
    pub index: usize,
    pub psi_source: PsiSource,
    /// `S_psi`, with genuinely unbounded ends kept infinite.
    pub selection: PhiIntervalUnion,
    /// Certified pieces visited by the sweep.
    pub pieces: usize,
    #[serde(flatten)]
    pub prob: SampleProb,
}

/// The estimate from a list of samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Weighted-average form `sum w_j p_j / sum w_j`.
    pub p_hat: f64,
    /// Ratio form `sum P(|phi| >= c, S_j) / sum P(S_j)`, computed in log
    /// space as a cross-check.
    pub p_hat_ratio: f64,
    pub zero_weight: usize,
}

/// Aggregates samples; `None` when no sample has positive weight.
pub fn aggregate(samples: &[SampleResult]) -> Option<Estimate> {
    let live: Vec<&SampleProb> = samples
        .iter()
        .map(|s| &s.prob)
        .filter(|p| p.log_w > f64::NEG_INFINITY)
        .collect();
    if live.is_empty() {
        return None;
    }
    let max_lw = live.iter().map(|p| p.log_w).fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for p in &live {
        let scaled = (p.log_w - max_lw).exp();
        num += scaled * p.p.expect("live sample has a p-value");
        den += scaled;
    }
    let ratio = (log_sum_exp(live.iter().map(|p| p.log_e)) - log_sum_exp(live.iter().map(|p| p.log_w))).exp();
    Some(Estimate {
        p_hat: (num / den).clamp(0.0, 1.0),
        p_hat_ratio: ratio.clamp(0.0, 1.0),
        zero_weight: samples.len() - live.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PValueReport {
    pub schema_version: u32,
    pub tau_hat: usize,
    pub window: Window,
    pub condition: SelectionCondition,
    pub detector: DetectorConfig,
    pub sigma: f64,
    pub master_seed: u64,
    pub include_observed: bool,
    pub n_samples: usize,
    pub phi_obs: f64,
    pub sd_phi: f64,
    pub domain: PhiInterval,
    pub p_hat: f64,
    pub p_hat_ratio: f64,
    pub zero_weight: usize,
    pub samples: Vec<SampleResult>,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

impl PValueReport {
    /// Estimate from the first `n` samples. Simulated streams do not depend
    /// on `N`, so this equals a fresh run with `n_samples = n`.
    pub fn p_hat_prefix(&self, n: usize) -> Option<Estimate> {
        aggregate(&self.samples[..n.min(self.samples.len())])
    }
}

/// Everything about a series that is shared by the tests of its
/// changepoints.
#[derive(Clone, Debug)]
pub struct PreparedSeries<'a> {
    pub series: &'a Series,
    pub detector: PreparedDetector,
    pub observed: ChangeSet,
}

impl<'a> PreparedSeries<'a> {
    pub fn new(series: &'a Series, detector: &DetectorConfig) -> Result<Self> {
        let detector = detector.prepare(series)?;
        let observed = detector.detect(series)?;
        Ok(Self {
            series,
            detector,
            observed,
        })
    }
}

/// Window, coordinates and selection condition for one changepoint.
#[derive(Clone, Debug)]
pub struct TestSetup {
    pub window: Window,
    pub basis: NuisanceBasis,
    pub contrast: Contrast,
    pub law: PhiLaw,
    pub phi_obs: f64,
    pub psi_obs: Vec<f64>,
    pub condition: SelectionCondition,
    pub domain: PhiInterval,
}

pub fn setup_test(prep: &PreparedSeries<'_>, tau_hat: usize, cfg: &TestConfig) -> Result<TestSetup> {
    cfg.validate()?;
    let j = prep
        .observed
        .indices
        .iter()
        .position(|&c| c == tau_hat)
        .ok_or(Error::NotDetected(tau_hat))?;
    let len = prep.series.len();
    let window = Window::for_changepoint(&prep.observed.indices, j, cfg.h, cfg.window_policy, len)?;
    let basis = build_nuisance_basis(&window, prep.series)?;
    let contrast = build_contrast(&window, len)?;
    let coords = decompose(prep.series, &basis, &contrast)?;
    let law = PhiLaw::for_window(cfg.sigma, &window)?;
    let condition = match cfg.effective_condition() {
        ConditionKind::ContainsTau => SelectionCondition::ContainsTau(tau_hat),
        ConditionKind::ExactMatch => SelectionCondition::ExactMatch(prep.observed.clone()),
    };
    Ok(TestSetup {
        domain: selection_domain(coords.phi, law.sd)?,
        window,
        basis,
        contrast,
        law,
        phi_obs: coords.phi,
        psi_obs: coords.psi,
        condition,
    })
}

/// `psi` drawn from `N(0, sigma^2 I)` on stream `(master_seed, [stream])`.
pub fn draw_psi(dim: usize, sigma: f64, master_seed: u64, stream: u64) -> Vec<f64> {
    let mut r = rng::stream(master_seed, &[stream]);
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            sigma * z
        })
        .collect()
}

/// Evaluates one `psi` sample.
pub fn evaluate_sample(
    prep: &PreparedSeries<'_>,
    setup: &TestSetup,
    index: usize,
    psi_source: PsiSource,
    psi: &[f64],
) -> Result<SampleResult> {
    let sel = selection_set(
        psi,
        &setup.basis,
        &setup.contrast,
        &prep.detector,
        &setup.condition,
        &setup.domain,
        setup.law.sd,
    )?;
    let selection = sel.unclipped();
    let prob = p_for_sample(&setup.law, &selection, setup.phi_obs.abs());
    Ok(SampleResult {
        index,
        psi_source,
        selection,
        pieces: sel.pieces,
        prob,
    })
}

/// The observed sample followed by simulated streams `1..=n_simulated`,
/// evaluated in parallel and returned in order.
pub fn compute_samples(
    prep: &PreparedSeries<'_>,
    setup: &TestSetup,
    sigma: f64,
    master_seed: u64,
    include_observed: bool,
    n_simulated: usize,
) -> Result<Vec<SampleResult>> {
    let mut sources: Vec<PsiSource> = Vec::with_capacity(n_simulated + 1);
    if include_observed {
        sources.push(PsiSource::Observed);
    }
    sources.extend((1..=n_simulated as u64).map(|stream| PsiSource::Simulated { stream }));
    sources
        .into_par_iter()
        .enumerate()
        .map(|(index, source)| {
            let psi = match source {
                PsiSource::Observed => setup.psi_obs.clone(),
                PsiSource::Simulated { stream } => draw_psi(setup.psi_obs.len(), sigma, master_seed, stream),
            };
            evaluate_sample(prep, setup, index, source, &psi)
        })
        .collect()
}

/// Tests one detected changepoint of a prepared series.
pub fn test_changepoint(prep: &PreparedSeries<'_>, tau_hat: usize, cfg: &TestConfig) -> Result<PValueReport> {
    let setup = setup_test(prep, tau_hat, cfg)?;
    let n_sim = if cfg.include_observed { cfg.n_samples - 1 } else { cfg.n_samples };
    let samples = compute_samples(prep, &setup, cfg.sigma, cfg.master_seed, cfg.include_observed, n_sim)?;
    if cfg.include_observed && samples[0].prob.p.is_none() {
        return Err(Error::Internal(format!(
            "observed data lies outside its own selection set at {tau_hat}"
        )));
    }
    let est = aggregate(&samples).ok_or_else(|| Error::Internal("no sample has positive weight".into()))?;
    Ok(PValueReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tau_hat,
        window: setup.window,
        condition: setup.condition,
        detector: cfg.detector.clone(),
        sigma: cfg.sigma,
        master_seed: cfg.master_seed,
        include_observed: cfg.include_observed,
        n_samples: cfg.n_samples,
        phi_obs: setup.phi_obs,
        sd_phi: setup.law.sd,
        domain: setup.domain,
        p_hat: est.p_hat,
        p_hat_ratio: est.p_hat_ratio,
        zero_weight: est.zero_weight,
        samples,
    })
}

/// Detects on `series`, then tests `tau_hat`.
pub fn estimate_p_value(series: &Series, tau_hat: usize, cfg: &TestConfig) -> Result<PValueReport> {
    cfg.validate()?;
    let prep = PreparedSeries::new(series, &cfg.detector)?;
    test_changepoint(&prep, tau_hat, cfg)
}

#[cfg(test)]
mod tests;
