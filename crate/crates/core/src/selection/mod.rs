// SPDX-License-Identifier: MIT OR Apache-2.0

//! Selection sets: the values of the test statistic `phi` for which the
//! detector, run on `X'(phi, psi)` with `psi` held fixed, still makes the
//! selection that led to the test.
//!
//! `X'(phi)` is affine in `phi`, so every quantity a detector computes is a
//! polynomial of degree at most two in `phi`. Replaying the detector on
//! those polynomials at a probe value `phi*` and recording the sign of each
//! comparison gives a set of polynomial conditions; the interval around
//! `phi*` on which all of them keep their sign is one on which the whole
//! execution trace, and hence the output, is unchanged. Sweeping such
//! intervals across a bounded domain yields the selection set exactly, up
//! to a progress guard of `1e-12` standard deviations.

mod interval;
mod poly;

use serde::{Deserialize, Serialize};

use crate::detect::scalar::Oracle;
use crate::detect::{ChangeSet, PreparedDetector};
use crate::error::{Error, Result};
use crate::projection::{reconstruct, Contrast, NuisanceBasis, PhiPsiCoords};

pub use interval::{PhiInterval, PhiIntervalUnion};
pub use poly::{certified_interval, Poly, Relation, TracePredicate};

/// Default cap on certified pieces per sweep.
pub const DEFAULT_MAX_PIECES: usize = 1_000_000;

/// Half-width of the default domain in standard deviations of `phi`.
pub const MIN_DOMAIN_SDS: f64 = 12.0;

/// The event conditioned on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionCondition {
    /// The tested changepoint is among the detections.
    ContainsTau(usize),
    /// The detections equal the observed set exactly.
    ExactMatch(ChangeSet),
}

impl SelectionCondition {
    /// Evaluates the condition on sorted changepoints.
    pub fn holds(&self, sorted_changepoints: &[usize]) -> bool {
        match self {
            SelectionCondition::ContainsTau(tau) => sorted_changepoints.binary_search(tau).is_ok(),
            SelectionCondition::ExactMatch(reference) => sorted_changepoints == reference.indices.as_slice(),
        }
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        match self {
            SelectionCondition::ContainsTau(tau) if *tau < 1 || *tau >= len => {
                Err(Error::invalid(format!("changepoint {tau} outside [1, {}]", len - 1)))
            }
            SelectionCondition::ExactMatch(cs)
                if cs.indices.windows(2).any(|w| w[0] >= w[1])
                    || cs.indices.iter().any(|&c| c < 1 || c >= len) =>
            {
                Err(Error::invalid("reference changepoints must be sorted and inside [1, T-1]"))
            }
            _ => Ok(()),
        }
    }
}

/// `X'_t(phi) = c_t + d_t phi`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicSeries {
    pub values: Vec<Poly>,
}

impl SymbolicSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn eval(&self, phi: f64) -> Vec<f64> {
        self.values.iter().map(|p| p.eval(phi)).collect()
    }
}

/// `c = U psi + fixed_part`, `d = nu / ||nu||^2`.
///
/// The last in-window entry of `d` is set to minus the running sum of the
/// others, so that sums over any stretch covering the whole window have an
/// exactly zero `phi` coefficient, as they do in exact arithmetic.
pub fn symbolic_series(psi: &[f64], basis: &NuisanceBasis, contrast: &Contrast) -> Result<SymbolicSeries> {
    if psi.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: psi.len(),
        });
    }
    if contrast.len() != basis.len() || contrast.window != *basis.window() {
        return Err(Error::invalid("basis and contrast were built for different windows"));
    }
    let mut c = basis.fixed_part.clone();
    basis.add_span(psi, &mut c);
    let w = contrast.window;
    let mut d = vec![0.0; c.len()];
    let mut running = 0.0;
    for t in w.start()..w.end() - 1 {
        d[t] = contrast.nu[t] / contrast.norm_sq;
        running += d[t];
    }
    d[w.end() - 1] = -running;
    Ok(SymbolicSeries {
        values: c.iter().zip(&d).map(|(&c, &d)| Poly::affine(c, d)).collect(),
    })
}

/// Resolves every comparison at a fixed probe and narrows the interval on
/// which all resolved comparisons keep their outcome.
struct TracingOracle {
    phi: f64,
    lo: f64,
    hi: f64,
    record: Option<Vec<TracePredicate>>,
}

impl TracingOracle {
    fn new(phi: f64, record: bool) -> Self {
        Self {
            phi,
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            record: record.then(Vec::new),
        }
    }

    #[inline]
    fn holds(&mut self, poly: Poly, relation: Relation) {
        poly::narrow(&poly, self.phi, &mut self.lo, &mut self.hi);
        if let Some(r) = self.record.as_mut() {
            r.push(TracePredicate { poly, relation });
        }
    }
}

impl Oracle<Poly> for TracingOracle {
    #[inline]
    fn gt(&mut self, a: Poly, b: Poly) -> bool {
        let d = a - b;
        if d.is_constant() {
            return d.c0 > 0.0;
        }
        let v = d.eval(self.phi);
        if v > 0.0 {
            self.holds(d, Relation::Positive);
            true
        } else {
            self.holds(-d, Relation::NonNegative);
            false
        }
    }

    #[inline]
    fn sign(&mut self, a: Poly) -> f64 {
        if a.is_constant() {
            return if a.c0 >= 0.0 { 1.0 } else { -1.0 };
        }
        if a.eval(self.phi) >= 0.0 {
            self.holds(a, Relation::NonNegative);
            1.0
        } else {
            self.holds(-a, Relation::Positive);
            -1.0
        }
    }

    /// Certifies only the winner: `|v_w| >= |v_j|` is exactly
    /// `s v_w - v_j >= 0` and `s v_w + v_j >= 0` once the sign `s` of
    /// `v_w` is fixed, so the losers' own signs never enter the trace.
    fn argmax_abs(&mut self, values: &[Poly]) -> (usize, f64) {
        let w = self.numeric_argmax_abs(values);
        let s = self.sign(values[w]);
        let top = values[w] * s;
        for (j, &v) in values.iter().enumerate() {
            if j != w {
                self.holds_unless_constant(top - v);
                self.holds_unless_constant(top + v);
            }
        }
        (w, s)
    }

    /// When nothing exceeds `level` the identity of the largest value is
    /// irrelevant; only `|v_j| <= level` for every `j` is recorded.
    fn max_abs_above(&mut self, values: &[Poly], level: Poly) -> Option<(usize, f64)> {
        let w = self.numeric_argmax_abs(values);
        let s = if values[w].eval(self.phi) >= 0.0 { 1.0 } else { -1.0 };
        if self.gt(values[w] * s, level) {
            return Some(self.argmax_abs(values));
        }
        for &v in values {
            self.holds_unless_constant(level - v);
            self.holds_unless_constant(level + v);
        }
        None
    }

    fn argmin_ranked(&mut self, values: &[Poly], ranks: &[usize]) -> usize {
        let evals: Vec<f64> = values.iter().map(|v| v.eval(self.phi)).collect();
        let mut w = 0;
        for i in 1..evals.len() {
            if evals[i] < evals[w] || (ranks[i] < ranks[w] && !(evals[i] > evals[w])) {
                w = i;
            }
        }
        for (j, &v) in values.iter().enumerate() {
            if j != w {
                self.holds_unless_constant(v - values[w]);
            }
        }
        w
    }
}

impl TracingOracle {
    /// First index of the largest `|v(phi)|`.
    fn numeric_argmax_abs(&self, values: &[Poly]) -> usize {
        let mut w = 0;
        let mut best = f64::NEG_INFINITY;
        for (i, v) in values.iter().enumerate() {
            let m = v.eval(self.phi).abs();
            if m > best {
                (w, best) = (i, m);
            }
        }
        w
    }

    #[inline]
    fn holds_unless_constant(&mut self, p: Poly) {
        if !p.is_constant() {
            self.holds(p, Relation::NonNegative);
        }
    }
}

/// One replay of the detector at `phi`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    /// Sorted changepoints detected at `phi`.
    pub changepoints: Vec<usize>,
    /// Every `phi`-dependent comparison outcome, as a predicate that holds.
    pub predicates: Vec<TracePredicate>,
    /// Interval around `phi` on which all predicates hold.
    pub certified: PhiInterval,
}

/// Replays the detector on the symbolic series at `phi`, keeping the
/// predicates.
pub fn trace_at(series: &SymbolicSeries, detector: &PreparedDetector, phi: f64) -> Result<Trace> {
    check_len(series, detector)?;
    let mut oracle = TracingOracle::new(phi, true);
    let mut changepoints = detector.run_generic(&series.values, &mut oracle).order;
    changepoints.sort_unstable();
    Ok(Trace {
        changepoints,
        predicates: oracle.record.unwrap_or_default(),
        certified: PhiInterval {
            lo: oracle.lo,
            hi: oracle.hi,
        },
    })
}

fn check_len(series: &SymbolicSeries, detector: &PreparedDetector) -> Result<()> {
    if series.len() != detector.len() {
        return Err(Error::DimensionMismatch {
            expected: detector.len(),
            got: series.len(),
        });
    }
    Ok(())
}

/// `[-B sd, B sd]` with `B = max(12, |phi_obs| / sd + 2)`.
pub fn selection_domain(phi_obs: f64, sd_phi: f64) -> Result<PhiInterval> {
    if !(sd_phi.is_finite() && sd_phi > 0.0) || !phi_obs.is_finite() {
        return Err(Error::invalid("domain needs a finite phi and a positive sd"));
    }
    let b = MIN_DOMAIN_SDS.max(phi_obs.abs() / sd_phi + 2.0);
    PhiInterval::new(-b * sd_phi, b * sd_phi)
}

/// Progress guard and iteration cap of the sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Certified pieces narrower than this are widened to it.
    pub min_width: f64,
    pub max_pieces: usize,
}

impl SweepOptions {
    pub fn for_sd(sd_phi: f64) -> Self {
        Self {
            min_width: 1e-12 * sd_phi,
            max_pieces: DEFAULT_MAX_PIECES,
        }
    }
}

/// A selection set together with sweep diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionSet {
    /// Intervals where the condition holds, clipped to `domain`.
    pub set: PhiIntervalUnion,
    pub domain: PhiInterval,
    /// The first interval really extends to `-inf`.
    pub open_below: bool,
    /// The last interval really extends to `+inf`.
    pub open_above: bool,
    /// Number of certified pieces visited.
    pub pieces: usize,
}

impl SelectionSet {
    /// The set with ends flagged as unbounded restored to infinity.
    pub fn unclipped(&self) -> PhiIntervalUnion {
        let mut ivs = self.set.intervals().to_vec();
        if self.open_below {
            if let Some(first) = ivs.first_mut() {
                first.lo = f64::NEG_INFINITY;
            }
        }
        if self.open_above {
            if let Some(last) = ivs.last_mut() {
                last.hi = f64::INFINITY;
            }
        }
        PhiIntervalUnion::from_intervals(ivs)
    }

    pub fn contains(&self, phi: f64) -> bool {
        self.unclipped().contains(phi)
    }
}

/// Sweeps `domain` from left to right with certified pieces and returns
/// the union of pieces on which `condition` holds.
pub fn selection_set_symbolic(
    series: &SymbolicSeries,
    detector: &PreparedDetector,
    condition: &SelectionCondition,
    domain: &PhiInterval,
    options: &SweepOptions,
) -> Result<SelectionSet> {
    check_len(series, detector)?;
    condition.validate(series.len())?;
    if !domain.is_bounded() {
        return Err(Error::invalid("selection domain must be bounded"));
    }
    if !(options.min_width > 0.0) {
        return Err(Error::invalid("sweep guard width must be positive"));
    }
    let mut kept = Vec::new();
    let (mut open_below, mut open_above) = (false, false);
    let mut cursor = domain.lo;
    let mut pieces = 0;
    let mut cps = Vec::new();
    while cursor < domain.hi {
        pieces += 1;
        if pieces > options.max_pieces {
            return Err(Error::IterationCap(options.max_pieces));
        }
        let mut oracle = TracingOracle::new(cursor, false);
        cps.clear();
        cps.extend(detector.run_generic(&series.values, &mut oracle).order);
        cps.sort_unstable();
        let holds = condition.holds(&cps);
        let next = (oracle.hi.max(cursor) + options.min_width).min(domain.hi);
        let next = if oracle.hi >= domain.hi { domain.hi } else { next };
        if holds {
            if kept.is_empty() && cursor == domain.lo && oracle.lo == f64::NEG_INFINITY {
                open_below = true;
            }
            if next == domain.hi && oracle.hi == f64::INFINITY {
                open_above = true;
            }
            kept.push(PhiInterval { lo: cursor, hi: next });
        }
        cursor = next;
    }
    Ok(SelectionSet {
        set: PhiIntervalUnion::from_intervals(kept),
        domain: *domain,
        open_below,
        open_above,
        pieces,
    })
}

/// [`selection_set_symbolic`] from nuisance coordinates, with the default
/// sweep options for `sd_phi`.
pub fn selection_set(
    psi: &[f64],
    basis: &NuisanceBasis,
    contrast: &Contrast,
    detector: &PreparedDetector,
    condition: &SelectionCondition,
    domain: &PhiInterval,
    sd_phi: f64,
) -> Result<SelectionSet> {
    let series = symbolic_series(psi, basis, contrast)?;
    selection_set_symbolic(&series, detector, condition, domain, &SweepOptions::for_sd(sd_phi))
}

/// `n` equally spaced points covering `domain`, both ends included.
pub fn grid_points(domain: &PhiInterval, n: usize) -> Vec<f64> {
    let step = domain.width() / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { domain.hi } else { domain.lo + step * i as f64 })
        .collect()
}

/// Brute-force membership: rebuild the plain series at each grid point,
/// run the detector and evaluate the condition.
pub fn grid_oracle_selection_set(
    psi: &[f64],
    basis: &NuisanceBasis,
    contrast: &Contrast,
    detector: &PreparedDetector,
    condition: &SelectionCondition,
    domain: &PhiInterval,
    n_grid: usize,
) -> Result<Vec<bool>> {
    if n_grid < 2 {
        return Err(Error::invalid("grid needs at least two points"));
    }
    grid_points(domain, n_grid)
        .into_iter()
        .map(|phi| {
            let coords = PhiPsiCoords {
                phi,
                psi: psi.to_vec(),
            };
            let x = reconstruct(&coords, basis, contrast)?;
            Ok(condition.holds(&detector.changepoints(x.values())))
        })
        .collect()
}
