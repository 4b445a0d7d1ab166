// SPDX-License-Identifier: MIT OR Apache-2.0

//! Polynomials of degree at most two in the test statistic, and the sign
//! conditions recorded while replaying a detector on them.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::interval::PhiInterval;
use crate::detect::scalar::Scalar;
use crate::error::{Error, Result};

/// `c0 + c1 * phi + c2 * phi^2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Poly {
    pub const fn new(c0: f64, c1: f64, c2: f64) -> Self {
        Self { c0, c1, c2 }
    }

    pub const fn affine(c0: f64, c1: f64) -> Self {
        Self { c0, c1, c2: 0.0 }
    }

    #[inline]
    pub fn eval(&self, phi: f64) -> f64 {
        (self.c2 * phi + self.c1) * phi + self.c0
    }

    #[inline]
    pub fn is_constant(&self) -> bool {
        self.c1 == 0.0 && self.c2 == 0.0
    }
}

impl Add for Poly {
    type Output = Poly;
    #[inline]
    fn add(self, o: Poly) -> Poly {
        Poly::new(self.c0 + o.c0, self.c1 + o.c1, self.c2 + o.c2)
    }
}

impl Sub for Poly {
    type Output = Poly;
    #[inline]
    fn sub(self, o: Poly) -> Poly {
        Poly::new(self.c0 - o.c0, self.c1 - o.c1, self.c2 - o.c2)
    }
}

impl Neg for Poly {
    type Output = Poly;
    #[inline]
    fn neg(self) -> Poly {
        Poly::new(-self.c0, -self.c1, -self.c2)
    }
}

impl Mul<f64> for Poly {
    type Output = Poly;
    #[inline]
    fn mul(self, k: f64) -> Poly {
        Poly::new(self.c0 * k, self.c1 * k, self.c2 * k)
    }
}

/// Product of two polynomials. The detectors only ever multiply affine
/// values, so the result stays within degree two.
impl Mul for Poly {
    type Output = Poly;
    #[inline]
    fn mul(self, o: Poly) -> Poly {
        debug_assert!(
            (self.c2 == 0.0 || (o.c1 == 0.0 && o.c2 == 0.0))
                && (o.c2 == 0.0 || (self.c1 == 0.0 && self.c2 == 0.0)),
            "product exceeds degree two"
        );
        Poly::new(
            self.c0 * o.c0,
            self.c0 * o.c1 + self.c1 * o.c0,
            self.c0 * o.c2 + self.c1 * o.c1 + self.c2 * o.c0,
        )
    }
}

impl Scalar for Poly {
    #[inline]
    fn constant(value: f64) -> Self {
        Poly::affine(value, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `poly >= 0`.
    NonNegative,
    /// `poly > 0`.
    Positive,
}

/// A sign condition on a polynomial in the test statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePredicate {
    pub poly: Poly,
    pub relation: Relation,
}

impl TracePredicate {
    pub fn holds_at(&self, phi: f64) -> bool {
        let v = self.poly.eval(phi);
        match self.relation {
            Relation::NonNegative => v >= 0.0,
            Relation::Positive => v > 0.0,
        }
    }
}

/// Narrows `[lo, hi]` to the piece containing `phi0` on which `p >= 0`,
/// given that `p(phi0) >= 0`. Which side of a root is kept follows from the
/// shape of `p`, so a root rounded to the wrong side of `phi0` can only
/// shrink the piece to zero width, never flip it.
#[inline]
pub(crate) fn narrow(p: &Poly, phi0: f64, lo: &mut f64, hi: &mut f64) {
    let Poly { c0, c1, c2 } = *p;
    if c2 == 0.0 {
        if c1 == 0.0 {
            return;
        }
        let r = -c0 / c1;
        if c1 > 0.0 {
            *lo = lo.max(r.min(phi0));
        } else {
            *hi = hi.min(r.max(phi0));
        }
        return;
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc <= 0.0 {
        // No crossing: p keeps one sign everywhere.
        return;
    }
    // |q| >= sqrt(disc) > 0, so both divisions are safe.
    let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
    let (a, b) = (q / c2, c0 / q);
    let (r1, r2) = (a.min(b), a.max(b));
    if c2 < 0.0 {
        *lo = lo.max(r1.min(phi0));
        *hi = hi.min(r2.max(phi0));
    } else if phi0 <= 0.5 * (r1 + r2) {
        *hi = hi.min(r1.max(phi0));
    } else {
        *lo = lo.max(r2.min(phi0));
    }
}

/// Largest interval containing `phi0` on which every predicate holds,
/// treating both ends as closed. The result has zero width when a
/// predicate's boundary passes through `phi0` itself.
pub fn certified_interval(predicates: &[TracePredicate], phi0: f64) -> Result<PhiInterval> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for pred in predicates {
        if !pred.holds_at(phi0) {
            return Err(Error::Internal(format!(
                "predicate {pred:?} does not hold at {phi0}"
            )));
        }
        narrow(&pred.poly, phi0, &mut lo, &mut hi);
    }
    Ok(PhiInterval { lo, hi })
}
