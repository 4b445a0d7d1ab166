// SPDX-License-Identifier: MIT OR Apache-2.0

//! Closed intervals of the test statistic and finite unions of them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `[lo, hi]`, either end possibly infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiInterval {
    pub lo: f64,
    pub hi: f64,
}

impl PhiInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::invalid(format!("interval needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub const fn real_line() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, phi: f64) -> bool {
        self.lo <= phi && phi <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// Overlap with `other`, if it has positive length.
    pub fn intersect(&self, other: &PhiInterval) -> Option<PhiInterval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(PhiInterval { lo, hi })
    }
}

/// Sorted, pairwise disjoint, non-adjacent closed intervals.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhiIntervalUnion {
    intervals: Vec<PhiInterval>,
}

impl PhiIntervalUnion {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn real_line() -> Self {
        Self {
            intervals: vec![PhiInterval::real_line()],
        }
    }

    /// Sorts and merges overlapping or touching intervals.
    pub fn from_intervals(mut intervals: Vec<PhiInterval>) -> Self {
        intervals.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut merged: Vec<PhiInterval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
                _ => merged.push(iv),
            }
        }
        Self { intervals: merged }
    }

    pub fn intervals(&self) -> &[PhiInterval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, phi: f64) -> bool {
        let i = self.intervals.partition_point(|iv| iv.hi < phi);
        self.intervals.get(i).is_some_and(|iv| iv.contains(phi))
    }

    pub fn intersect(&self, other: &PhiIntervalUnion) -> PhiIntervalUnion {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let (a, b) = (self.intervals[i], other.intervals[j]);
            if let Some(iv) = a.intersect(&b) {
                out.push(iv);
            }
            if a.hi < b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        PhiIntervalUnion::from_intervals(out)
    }

    pub fn intersect_interval(&self, iv: &PhiInterval) -> PhiIntervalUnion {
        self.intersect(&PhiIntervalUnion { intervals: vec![*iv] })
    }

    /// `(-inf, -c] U [c, inf)`; the real line when `c <= 0`.
    pub fn two_sided_tails(c: f64) -> PhiIntervalUnion {
        if c <= 0.0 {
            return Self::real_line();
        }
        Self {
            intervals: vec![
                PhiInterval {
                    lo: f64::NEG_INFINITY,
                    hi: -c,
                },
                PhiInterval {
                    lo: c,
                    hi: f64::INFINITY,
                },
            ],
        }
    }

    /// Whether every point of `self` lies in `other`, allowing each
    /// endpoint to be off by `tol`.
    pub fn is_subset_of(&self, other: &PhiIntervalUnion, tol: f64) -> bool {
        self.intervals.iter().all(|a| {
            other
                .intervals
                .iter()
                .any(|b| b.lo - tol <= a.lo && a.hi <= b.hi + tol)
        })
    }

    /// Distance from `phi` to the nearest endpoint.
    pub fn distance_to_boundary(&self, phi: f64) -> f64 {
        self.intervals
            .iter()
            .flat_map(|iv| [iv.lo, iv.hi])
            .map(|e| (e - phi).abs())
            .fold(f64::INFINITY, f64::min)
    }
}
