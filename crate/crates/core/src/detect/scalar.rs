// SPDX-License-Identifier: MIT OR Apache-2.0

//! Arithmetic and comparison interface the detectors are written against.
//!
//! Detectors only combine data values with `+`, `-`, `*` and compare the
//! results through an [`Oracle`]. Running them with `f64` and
//! [`PlainOracle`] is ordinary detection; running them with polynomials in
//! the test statistic and a recording oracle replays the same control flow
//! while collecting the conditions that pin it down.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Neg<Output = Self>
{
    fn constant(value: f64) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn constant(value: f64) -> Self {
        value
    }
}

/// Decides every comparison a detector makes.
pub trait Oracle<S: Scalar> {
    /// `a > b`.
    fn gt(&mut self, a: S, b: S) -> bool;

    /// `a < b`.
    fn lt(&mut self, a: S, b: S) -> bool {
        self.gt(b, a)
    }

    /// Sign of `a` as `+1.0` or `-1.0`; zero counts as positive.
    fn sign(&mut self, a: S) -> f64;

    /// `|a|`, expressed as `sign(a) * a`.
    fn abs(&mut self, a: S) -> (S, f64) {
        let s = self.sign(a);
        (a * s, s)
    }

    /// Index of the largest `|v|` (first on ties) and the sign of that
    /// value. `values` must be non-empty.
    fn argmax_abs(&mut self, values: &[S]) -> (usize, f64) {
        let (mut best, mut best_sign) = (0, 1.0);
        let mut best_mag: Option<S> = None;
        for (i, &v) in values.iter().enumerate() {
            let (m, s) = self.abs(v);
            let better = match best_mag {
                None => true,
                Some(bm) => self.gt(m, bm),
            };
            if better {
                (best, best_sign, best_mag) = (i, s, Some(m));
            }
        }
        (best, best_sign)
    }

    /// [`Oracle::argmax_abs`] when the largest `|v|` exceeds `level`.
    fn max_abs_above(&mut self, values: &[S], level: S) -> Option<(usize, f64)> {
        let (i, s) = self.argmax_abs(values);
        self.gt(values[i] * s, level).then_some((i, s))
    }

    /// Index of the smallest value. Exact ties go to the smaller rank, then
    /// to the earlier index. `values` must be non-empty.
    fn argmin_ranked(&mut self, values: &[S], ranks: &[usize]) -> usize {
        let mut best = 0;
        for i in 1..values.len() {
            let (v, b) = (values[i], values[best]);
            if self.lt(v, b) || (ranks[i] < ranks[best] && !self.gt(v, b)) {
                best = i;
            }
        }
        best
    }
}

/// Ordinary floating-point comparisons.
#[derive(Clone, Copy, Debug, Default)]
pub struct PlainOracle;

impl Oracle<f64> for PlainOracle {
    #[inline]
    fn gt(&mut self, a: f64, b: f64) -> bool {
        a > b
    }

    #[inline]
    fn sign(&mut self, a: f64) -> f64 {
        if a >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}
