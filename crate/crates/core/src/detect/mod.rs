// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change-in-mean detectors: binary segmentation, wild binary segmentation
//! and L0-penalised optimal partitioning.
//!
//! The algorithms live in generic cores (see [`scalar`]) so the selection
//! module can replay them on values that depend on the test statistic.

mod bs;
mod l0;
pub mod scalar;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::series::Series;

pub use l0::l0_objective;
use scalar::{Oracle, PlainOracle, Scalar};

/// Default number of random intervals for wild binary segmentation.
pub const DEFAULT_WBS_INTERVALS: usize = 100;

/// How wild binary segmentation obtains its intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WbsIntervals {
    /// `count` intervals drawn uniformly from the series once per run.
    Random { count: usize, seed: u64 },
    /// 1-based inclusive `(start, end)` pairs.
    Explicit(Vec<(usize, usize)>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Algorithm {
    Bs,
    Wbs { intervals: WbsIntervals },
    L0,
}

/// Stopping rule. For L0, `Threshold` is the penalty per changepoint and
/// `FixedCount` is realised by searching for a matching penalty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stopping {
    FixedCount(usize),
    Threshold(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub algorithm: Algorithm,
    pub stopping: Stopping,
    /// Noise standard deviation. BS/WBS accept a split when
    /// `|cusum| > threshold * noise_scale`; L0 ignores it.
    pub noise_scale: f64,
}

impl DetectorConfig {
    pub fn bs(stopping: Stopping) -> Self {
        Self {
            algorithm: Algorithm::Bs,
            stopping,
            noise_scale: 1.0,
        }
    }

    pub fn wbs(stopping: Stopping, interval_count: usize, interval_seed: u64) -> Self {
        Self {
            algorithm: Algorithm::Wbs {
                intervals: WbsIntervals::Random {
                    count: interval_count,
                    seed: interval_seed,
                },
            },
            stopping,
            noise_scale: 1.0,
        }
    }

    pub fn l0(penalty: f64) -> Self {
        Self {
            algorithm: Algorithm::L0,
            stopping: Stopping::Threshold(penalty),
            noise_scale: 1.0,
        }
    }

    pub fn with_noise_scale(mut self, sigma: f64) -> Self {
        self.noise_scale = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return Err(Error::invalid("detector noise scale must be positive"));
        }
        match self.stopping {
            Stopping::FixedCount(0) => {
                return Err(Error::invalid("fixed changepoint count must be >= 1"))
            }
            Stopping::Threshold(t) if !(t.is_finite() && t > 0.0) => {
                return Err(Error::invalid("threshold / penalty must be positive"))
            }
            _ => {}
        }
        if let Algorithm::Wbs { intervals } = &self.algorithm {
            match intervals {
                WbsIntervals::Random { count: 0, .. } => {
                    return Err(Error::invalid("wbs needs at least one interval"))
                }
                WbsIntervals::Explicit(v) if v.is_empty() => {
                    return Err(Error::invalid("wbs needs at least one interval"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Resolves data-dependent pieces of the configuration against the
    /// observed series: draws WBS intervals and, for L0 with a fixed count,
    /// finds the penalty. The result is reused unchanged for every
    /// perturbed series.
    pub fn prepare(&self, series: &Series) -> Result<PreparedDetector> {
        self.validate()?;
        let len = series.len();
        let kind = match (&self.algorithm, self.stopping) {
            (Algorithm::Bs, stopping) => PreparedKind::Bs {
                stopping: self.scaled(stopping),
                intervals: None,
                zero_level: zero_level(series),
            },
            (Algorithm::Wbs { intervals }, stopping) => PreparedKind::Bs {
                stopping: self.scaled(stopping),
                intervals: Some(resolve_intervals(intervals, len)?),
                zero_level: zero_level(series),
            },
            (Algorithm::L0, Stopping::Threshold(penalty)) => PreparedKind::L0 { penalty },
            (Algorithm::L0, Stopping::FixedCount(k)) => PreparedKind::L0 {
                penalty: l0_penalty_for_count(series, k)?,
            },
        };
        Ok(PreparedDetector { len, kind })
    }

    fn scaled(&self, stopping: Stopping) -> Stopping {
        match stopping {
            Stopping::Threshold(t) => Stopping::Threshold(t * self.noise_scale),
            s => s,
        }
    }
}

/// `|cusum|` values at or below this level count as zero in fixed-count
/// mode; it absorbs rounding in the statistic of a flat segment.
fn zero_level(series: &Series) -> f64 {
    1e-10 * series.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn resolve_intervals(spec: &WbsIntervals, len: usize) -> Result<Vec<(usize, usize)>> {
    match spec {
        WbsIntervals::Explicit(v) => {
            for &(s, e) in v {
                if s < 1 || e > len || s >= e {
                    return Err(Error::invalid(format!(
                        "wbs interval ({s}, {e}) invalid for T = {len}"
                    )));
                }
            }
            Ok(v.clone())
        }
        WbsIntervals::Random { count, seed } => {
            let mut rng = rng::stream(*seed, &[len as u64]);
            let mut out = Vec::with_capacity(*count);
            while out.len() < *count {
                let a = rng.random_range(1..=len);
                let b = rng.random_range(1..=len);
                if a != b {
                    out.push((a.min(b), a.max(b)));
                }
            }
            Ok(out)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum PreparedKind {
    /// Thresholds here are absolute `|cusum|` levels.
    Bs {
        stopping: Stopping,
        intervals: Option<Vec<(usize, usize)>>,
        zero_level: f64,
    },
    L0 {
        penalty: f64,
    },
}

/// A detector with every random or data-calibrated choice fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedDetector {
    len: usize,
    kind: PreparedKind,
}

/// Raw detector output: changepoints in the order they were accepted, with
/// jump signs where the algorithm produces them.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Detection {
    pub order: Vec<usize>,
    pub signs: Option<Vec<f64>>,
}

impl PreparedDetector {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The penalty in use when this is an L0 detector.
    pub fn l0_penalty(&self) -> Option<f64> {
        match self.kind {
            PreparedKind::L0 { penalty } => Some(penalty),
            _ => None,
        }
    }

    pub(crate) fn run_generic<S: Scalar, O: Oracle<S>>(&self, x: &[S], oracle: &mut O) -> Detection {
        debug_assert_eq!(x.len(), self.len);
        match &self.kind {
            PreparedKind::Bs {
                stopping,
                intervals,
                zero_level,
            } => bs::run(x, *stopping, intervals.as_deref(), *zero_level, oracle),
            PreparedKind::L0 { penalty } => Detection {
                order: l0::run(x, *penalty, oracle),
                signs: None,
            },
        }
    }

    /// Sorted changepoints of a plain series.
    pub fn changepoints(&self, x: &[f64]) -> Vec<usize> {
        let mut cps = self.run_generic(x, &mut PlainOracle).order;
        cps.sort_unstable();
        cps
    }

    pub fn detect(&self, series: &Series) -> Result<ChangeSet> {
        if series.len() != self.len {
            return Err(Error::DimensionMismatch {
                expected: self.len,
                got: series.len(),
            });
        }
        let det = self.run_generic(series.values(), &mut PlainOracle);
        Ok(ChangeSet::from_detection(series.values(), det))
    }
}

/// Detected changepoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeSet {
    /// Sorted, strictly increasing, each in `[1, T-1]`.
    pub indices: Vec<usize>,
    /// Acceptance order; for L0 equal to `indices`.
    pub order_found: Vec<usize>,
    /// `+1.0` when the mean increases across the changepoint, `-1.0` otherwise.
    pub signs: Vec<f64>,
}

impl ChangeSet {
    fn from_detection(x: &[f64], det: Detection) -> Self {
        let mut indices = det.order.clone();
        indices.sort_unstable();
        let signs = match det.signs {
            Some(order_signs) => indices
                .iter()
                .map(|cp| {
                    let k = det.order.iter().position(|c| c == cp).expect("same set");
                    order_signs[k]
                })
                .collect(),
            None => segment_mean_signs(x, &indices),
        };
        Self {
            indices,
            order_found: det.order,
            signs,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, tau: usize) -> bool {
        self.indices.binary_search(&tau).is_ok()
    }
}

fn segment_mean_signs(x: &[f64], cps: &[usize]) -> Vec<f64> {
    let mut bounds = Vec::with_capacity(cps.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(cps);
    bounds.push(x.len());
    let means: Vec<f64> = bounds
        .windows(2)
        .map(|w| x[w[0]..w[1]].iter().sum::<f64>() / (w[1] - w[0]) as f64)
        .collect();
    means
        .windows(2)
        .map(|m| if m[1] >= m[0] { 1.0 } else { -1.0 })
        .collect()
}

/// CUSUM statistic for a split after `b` within `[s, e]` (1-based,
/// inclusive): `sqrt((b-s+1)(e-b)/n) * (mean_left - mean_right)`.
pub fn cusum(series: &Series, s: usize, e: usize, b: usize) -> Result<f64> {
    if s < 1 || e > series.len() || !(s <= b && b < e) {
        return Err(Error::invalid(format!(
            "cusum needs 1 <= s <= b < e <= T, got s={s}, b={b}, e={e}, T={}",
            series.len()
        )));
    }
    let prefix = bs::prefix_sums(series.values());
    Ok(bs::cusum_from_prefix(&prefix, s, e, b))
}

/// Any configured detector on a plain series.
pub fn detect(series: &Series, config: &DetectorConfig) -> Result<ChangeSet> {
    config.prepare(series)?.detect(series)
}

pub fn binary_segmentation(series: &Series, config: &DetectorConfig) -> Result<ChangeSet> {
    if config.algorithm != Algorithm::Bs {
        return Err(Error::invalid("binary_segmentation needs algorithm = bs"));
    }
    detect(series, config)
}

pub fn wild_binary_segmentation(series: &Series, config: &DetectorConfig) -> Result<ChangeSet> {
    if !matches!(config.algorithm, Algorithm::Wbs { .. }) {
        return Err(Error::invalid("wild_binary_segmentation needs algorithm = wbs"));
    }
    detect(series, config)
}

pub fn l0_segmentation(series: &Series, penalty: f64) -> Result<ChangeSet> {
    detect(series, &DetectorConfig::l0(penalty))
}

/// A penalty for which L0 segmentation returns exactly `target`
/// changepoints, found by bisection on a log scale. The number of
/// changepoints is non-increasing in the penalty.
pub fn l0_penalty_for_count(series: &Series, target: usize) -> Result<f64> {
    let x = series.values();
    let count = |penalty: f64| l0::run(x, penalty, &mut PlainOracle).len();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let total_rss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let mut hi = total_rss.max(f64::MIN_POSITIVE) * 2.0 + 1.0;
    let mut lo = hi * 1e-14;
    let (mut count_lo, mut count_hi) = (count(lo), count(hi));
    if target > count_lo {
        return Err(Error::CountUnreachable {
            target,
            below: count_lo,
            above: count_lo,
        });
    }
    if count_lo == target {
        return Ok(lo);
    }
    if count_hi == target {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let c = count(mid);
        if c == target {
            return Ok(mid);
        }
        if c > target {
            lo = mid;
            count_lo = c;
        } else {
            hi = mid;
            count_hi = c;
        }
        if hi / lo < 1.0 + 1e-13 {
            break;
        }
    }
    Err(Error::CountUnreachable {
        target,
        below: count_hi,
        above: count_lo,
    })
}
