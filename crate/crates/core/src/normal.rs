// SPDX-License-Identifier: MIT OR Apache-2.0

//! Standard normal interval probabilities that stay accurate far in the
//! tails, in log space.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

/// `ln(sqrt(2 pi))`.
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Above this the continued fraction replaces `erfc`, well before `erfc`
/// underflows (near 37.5 standard deviations).
const CF_SWITCH: f64 = 30.0;

/// Probabilities below this are reported as exactly zero.
pub const PROB_FLOOR: f64 = 1e-300;

/// `Q(z) = P(Z > z)`.
pub fn upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// `ln Q(z)`.
pub fn log_upper_tail(z: f64) -> f64 {
    if z == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    if z < 0.0 {
        return (-upper_tail(-z)).ln_1p();
    }
    if z < CF_SWITCH {
        return upper_tail(z).ln();
    }
    // Mills ratio: Q(z) = pdf(z) / (z + 1/(z + 2/(z + 3/(z + ...)))).
    let mut tail = z;
    for k in (1..=60).rev() {
        tail = z + k as f64 / tail;
    }
    -0.5 * z * z - LN_SQRT_2PI - tail.ln()
}

/// `ln(1 - e^x)` for `x <= 0`.
fn log1m_exp(x: f64) -> f64 {
    if x > -LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln P(a <= Z <= b)` for a standard normal `Z`; `-inf` when `a >= b`.
pub fn log_interval_prob(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() || a >= b {
        return f64::NEG_INFINITY;
    }
    if a >= 0.0 {
        let (la, lb) = (log_upper_tail(a), log_upper_tail(b));
        if la == f64::NEG_INFINITY {
            return la;
        }
        return la + log1m_exp(lb - la);
    }
    if b <= 0.0 {
        return log_interval_prob(-b, -a);
    }
    // Straddles zero: the two erf halves are both positive.
    let left = if a == f64::NEG_INFINITY { 1.0 } else { libm::erf(-a * FRAC_1_SQRT_2) };
    let right = if b == f64::INFINITY { 1.0 } else { libm::erf(b * FRAC_1_SQRT_2) };
    (0.5 * (left + right)).ln()
}

/// `P(a <= Z <= b)`, with values below [`PROB_FLOOR`] reported as zero.
pub fn interval_prob(a: f64, b: f64) -> f64 {
    clamp_prob(log_interval_prob(a, b).exp())
}

pub(crate) fn clamp_prob(p: f64) -> f64 {
    if p < PROB_FLOOR {
        0.0
    } else {
        p.min(1.0)
    }
}

/// `ln sum exp(x_i)`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
