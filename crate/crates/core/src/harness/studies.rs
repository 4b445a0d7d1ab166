// SPDX-License-Identifier: MIT OR Apache-2.0

//! Replicated simulation studies. Each replicate draws its series and
//! Monte Carlo streams from seeds derived from `(master_seed, replicate)`,
//! so results do not depend on scheduling or thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{ks_uniform, match_changepoints, qq_points, KsResult, MatchCounts};
use super::{validate_alpha, Scenario, SigmaMode, TestTarget, SCHEMA_VERSION};
use crate::detect::DetectorConfig;
use crate::error::{Error, Result};
use crate::inference::{aggregate, compute_samples, setup_test, ConditionKind, PreparedSeries, SampleResult, TestConfig};
use crate::multiplicity::{benjamini_hochberg, holm_bonferroni};
use crate::projection::WindowPolicy;
use crate::rng::derive_seed;

/// Shared configuration of the null and power studies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenario: Scenario,
    pub detector: DetectorConfig,
    pub h: usize,
    pub condition: ConditionKind,
    pub sigma: SigmaMode,
    /// Monte Carlo sizes to report; all are prefixes of one computation.
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub master_seed: u64,
    pub alpha: f64,
    pub target: TestTarget,
    /// Count only replicates with at least one detection towards
    /// `replicates`, simulating more (up to `MAX_OVERSAMPLING` times as
    /// many) until enough are retained.
    pub count_retained_only: bool,
}

/// Cap on simulated replicates per requested one when counting retained
/// replicates only.
pub const MAX_OVERSAMPLING: usize = 100;

impl StudyConfig {
    pub fn new(scenario: Scenario, detector: DetectorConfig, h: usize, n_grid: Vec<usize>, replicates: usize) -> Self {
        let sigma = scenario.noise.std_dev();
        Self {
            scenario,
            detector,
            h,
            condition: ConditionKind::ContainsTau,
            sigma: SigmaMode::Known { sigma },
            n_grid,
            replicates,
            master_seed: 0,
            alpha: 0.05,
            target: TestTarget::All,
            count_retained_only: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_alpha(self.alpha)?;
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(Error::invalid("N grid must be non-empty with every N >= 1"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("need at least one replicate"));
        }
        if let SigmaMode::Known { sigma } = self.sigma {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
            }
        }
        self.test_config(1.0, 0, 0).validate()
    }

    fn n_max(&self) -> usize {
        self.n_grid.iter().copied().max().unwrap_or(1)
    }

    fn test_config(&self, sigma: f64, replicate: usize, tau: usize) -> TestConfig {
        TestConfig {
            detector: self.detector.clone().with_noise_scale(sigma),
            h: self.h,
            window_policy: WindowPolicy::FixedH,
            condition: self.condition,
            n_samples: self.n_max(),
            sigma,
            master_seed: derive_seed(self.master_seed, &[replicate as u64, 1, tau as u64]),
            include_observed: true,
        }
    }
}

/// Samples for every tested changepoint of one replicate.
struct Replicate {
    taus: Vec<usize>,
    /// Position in `taus` of the first detected changepoint, if tested.
    first: Option<usize>,
    samples: Vec<Vec<SampleResult>>,
    skipped: usize,
}

enum Outcome {
    Used(Replicate),
    NoDetection,
    ZeroSigma,
}

fn run_replicate(cfg: &StudyConfig, r: usize, n_simulated: usize) -> Result<Outcome> {
    let series = cfg.scenario.simulate(derive_seed(cfg.master_seed, &[r as u64, 0]));
    let sigma = match cfg.sigma.resolve(&series) {
        Ok(s) => s,
        Err(_) => return Ok(Outcome::ZeroSigma),
    };
    let detector = cfg.detector.clone().with_noise_scale(sigma);
    let prep = PreparedSeries::new(&series, &detector)?;
    if prep.observed.is_empty() {
        return Ok(Outcome::NoDetection);
    }
    let mut rep = Replicate {
        taus: Vec::new(),
        first: None,
        samples: Vec::new(),
        skipped: 0,
    };
    for tau in cfg.target.select(&prep.observed) {
        let tcfg = cfg.test_config(sigma, r, tau);
        let setup = match setup_test(&prep, tau, &tcfg) {
            Ok(s) => s,
            Err(Error::InvalidWindow(_)) => {
                rep.skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let samples = compute_samples(&prep, &setup, sigma, tcfg.master_seed, true, n_simulated)?;
        if samples[0].prob.p.is_none() {
            return Err(Error::Internal(format!("replicate {r}: observed data outside its selection set")));
        }
        if prep.observed.order_found[0] == tau {
            rep.first = Some(rep.taus.len());
        }
        rep.taus.push(tau);
        rep.samples.push(samples);
    }
    Ok(Outcome::Used(rep))
}

fn run_all(cfg: &StudyConfig, n_simulated: usize) -> Result<Vec<Outcome>> {
    cfg.validate()?;
    let run = |range: std::ops::Range<usize>| -> Result<Vec<Outcome>> {
        range.into_par_iter().map(|r| run_replicate(cfg, r, n_simulated)).collect()
    };
    if !cfg.count_retained_only {
        return run(0..cfg.replicates);
    }
    // Batches keep the result independent of scheduling: replicates are
    // taken in index order up to the one that completes the count.
    let cap = cfg.replicates * MAX_OVERSAMPLING;
    let mut out = Vec::new();
    let mut retained = 0;
    while out.len() < cap {
        let start = out.len();
        let batch = run(start..(start + cfg.replicates).min(cap))?;
        for o in batch {
            retained += usize::from(matches!(o, Outcome::Used(_)));
            out.push(o);
            if retained == cfg.replicates {
                return Ok(out);
            }
        }
    }
    Err(Error::invalid(format!(
        "only {retained} of {cap} simulated replicates had detections; {} needed",
        cfg.replicates
    )))
}

/// Sorted p-value estimates for one `N` with their uniformity diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QqSeries {
    pub n: usize,
    pub include_observed: bool,
    /// Estimates dropped because every sample had zero weight.
    pub zero_weight_excluded: usize,
    pub ks: Option<KsResult>,
    pub fraction_above_099: f64,
    pub quantiles: Vec<f64>,
    pub p_values: Vec<f64>,
}

impl QqSeries {
    fn new(n: usize, include_observed: bool, p: Vec<f64>, zero_weight_excluded: usize) -> Self {
        let above = p.iter().filter(|&&v| v > 0.99).count();
        let fraction_above_099 = if p.is_empty() { 0.0 } else { above as f64 / p.len() as f64 };
        let (quantiles, p_values) = qq_points(&p);
        Self {
            n,
            include_observed,
            zero_weight_excluded,
            ks: ks_uniform(&p_values),
            fraction_above_099,
            quantiles,
            p_values,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullStudyReport {
    pub schema_version: u32,
    pub config: StudyConfig,
    pub replicates_simulated: usize,
    pub replicates_used: usize,
    /// Replicates where the detector returned nothing.
    pub discarded_no_detection: usize,
    pub discarded_zero_sigma: usize,
    pub skipped_tests: usize,
    pub with_observed: Vec<QqSeries>,
    pub without_observed: Vec<QqSeries>,
}

/// Minimum replicate count of a null study.
pub const MIN_NULL_REPLICATES: usize = 100;

/// p-value estimates for every `N` in the grid, with the observed `psi`
/// as the first sample and with every sample simulated. Both variants
/// share the simulated streams; at `N = 1` they coincide.
pub fn run_null_study(cfg: &StudyConfig) -> Result<NullStudyReport> {
    if cfg.replicates < MIN_NULL_REPLICATES {
        return Err(Error::invalid(format!(
            "a null study needs at least {MIN_NULL_REPLICATES} replicates"
        )));
    }
    let outcomes = run_all(cfg, cfg.n_max())?;
    let mut report = NullStudyReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        replicates_simulated: outcomes.len(),
        replicates_used: 0,
        discarded_no_detection: 0,
        discarded_zero_sigma: 0,
        skipped_tests: 0,
        with_observed: Vec::new(),
        without_observed: Vec::new(),
    };
    let mut used = Vec::new();
    for o in &outcomes {
        match o {
            Outcome::Used(rep) => {
                report.skipped_tests += rep.skipped;
                used.push(rep);
            }
            Outcome::NoDetection => report.discarded_no_detection += 1,
            Outcome::ZeroSigma => report.discarded_zero_sigma += 1,
        }
    }
    report.replicates_used = used.len();
    for &n in &cfg.n_grid {
        for include_observed in [true, false] {
            let range = if include_observed || n == 1 { 0..n } else { 1..n + 1 };
            let (mut p, mut excluded) = (Vec::new(), 0);
            for s in used.iter().flat_map(|rep| &rep.samples) {
                match aggregate(&s[range.clone()]) {
                    Some(e) => p.push(e.p_hat),
                    None => excluded += 1,
                }
            }
            let series = QqSeries::new(n, include_observed, p, excluded);
            if include_observed {
                report.with_observed.push(series);
            } else {
                report.without_observed.push(series);
            }
        }
    }
    Ok(report)
}

/// Flag accounting under one multiplicity correction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSummary {
    pub mean_true_positives: f64,
    pub mean_false_positives: f64,
    /// Fraction of replicates with at least one false positive.
    pub fwer: f64,
    /// Mean over replicates of `FP / (FP + TP)`, zero when nothing is flagged.
    pub fdr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub n: usize,
    /// Fraction of replicates whose first detected changepoint has
    /// unadjusted `p < alpha`.
    pub rejection_rate: f64,
    /// Replicates contributing to `rejection_rate`.
    pub first_tested: usize,
    /// Fraction of all tests with unadjusted `p < alpha`.
    pub raw_rejection_rate: f64,
    pub tests: usize,
    pub holm: CorrectionSummary,
    pub bh: CorrectionSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerStudyReport {
    pub schema_version: u32,
    pub config: StudyConfig,
    pub truth: Vec<usize>,
    pub replicates_simulated: usize,
    pub replicates_used: usize,
    pub discarded_no_detection: usize,
    pub discarded_zero_sigma: usize,
    pub skipped_tests: usize,
    pub rows: Vec<PowerRow>,
    /// Per-replicate flag counts, `[row][replicate]`, Holm then BH.
    pub holm_counts: Vec<Vec<MatchCounts>>,
    pub bh_counts: Vec<Vec<MatchCounts>>,
}

#[derive(Default)]
struct Tally {
    tp: f64,
    fp: f64,
    any_fp: usize,
    fdr: f64,
}

impl Tally {
    fn add(&mut self, m: MatchCounts) {
        self.tp += m.true_positives as f64;
        self.fp += m.false_positives as f64;
        self.any_fp += usize::from(m.false_positives > 0);
        let flagged = m.true_positives + m.false_positives;
        if flagged > 0 {
            self.fdr += m.false_positives as f64 / flagged as f64;
        }
    }

    fn summary(&self, reps: usize) -> CorrectionSummary {
        if reps == 0 {
            return CorrectionSummary::default();
        }
        let n = reps as f64;
        CorrectionSummary {
            mean_true_positives: self.tp / n,
            mean_false_positives: self.fp / n,
            fwer: self.any_fp as f64 / n,
            fdr: self.fdr / n,
        }
    }
}

/// Rejection rates and multiplicity-adjusted true/false positive counts
/// for every `N` in the grid. A flagged changepoint is a true positive
/// when it lies strictly within `h` of an unmatched true change.
pub fn run_power_study(cfg: &StudyConfig) -> Result<PowerStudyReport> {
    let outcomes = run_all(cfg, cfg.n_max() - 1)?;
    let truth = cfg.scenario.truth().to_vec();
    let mut report = PowerStudyReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        truth: truth.clone(),
        replicates_simulated: outcomes.len(),
        replicates_used: 0,
        discarded_no_detection: 0,
        discarded_zero_sigma: 0,
        skipped_tests: 0,
        rows: Vec::new(),
        holm_counts: Vec::new(),
        bh_counts: Vec::new(),
    };
    let mut used = Vec::new();
    for o in &outcomes {
        match o {
            Outcome::Used(rep) => {
                report.skipped_tests += rep.skipped;
                used.push(rep);
            }
            Outcome::NoDetection => report.discarded_no_detection += 1,
            Outcome::ZeroSigma => report.discarded_zero_sigma += 1,
        }
    }
    report.replicates_used = used.len();
    for &n in &cfg.n_grid {
        let (mut holm, mut bh) = (Tally::default(), Tally::default());
        let (mut holm_counts, mut bh_counts) = (Vec::new(), Vec::new());
        let (mut first_tested, mut first_rejected, mut tests, mut raw_rejected) = (0, 0, 0, 0);
        for rep in &used {
            let p: Vec<f64> = rep
                .samples
                .iter()
                .map(|s| aggregate(&s[..n]).map(|e| e.p_hat))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::Internal("observed sample lost its weight".into()))?;
            tests += p.len();
            raw_rejected += p.iter().filter(|&&v| v < cfg.alpha).count();
            if let Some(k) = rep.first {
                first_tested += 1;
                first_rejected += usize::from(p[k] < cfg.alpha);
            }
            let flag_counts = |adj: Vec<f64>| {
                let flagged: Vec<usize> = rep
                    .taus
                    .iter()
                    .zip(&adj)
                    .filter(|(_, &a)| a < cfg.alpha)
                    .map(|(&t, _)| t)
                    .collect();
                match_changepoints(&flagged, &truth, cfg.h)
            };
            let (mh, mb) = if p.is_empty() {
                (MatchCounts::default(), MatchCounts::default())
            } else {
                (flag_counts(holm_bonferroni(&p)?), flag_counts(benjamini_hochberg(&p)?))
            };
            holm.add(mh);
            bh.add(mb);
            holm_counts.push(mh);
            bh_counts.push(mb);
        }
        let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        report.rows.push(PowerRow {
            n,
            rejection_rate: frac(first_rejected, first_tested),
            first_tested,
            raw_rejection_rate: frac(raw_rejected, tests),
            tests,
            holm: holm.summary(used.len()),
            bh: bh.summary(used.len()),
        });
        report.holm_counts.push(holm_counts);
        report.bh_counts.push(bh_counts);
    }
    Ok(report)
}
