// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multiple-testing adjustments. Both functions return adjusted p-values
//! in the input order, to be compared with the target level directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    /// Holm-Bonferroni step-down; controls the family-wise error rate.
    #[default]
    Holm,
    /// Benjamini-Hochberg step-up; controls the false discovery rate.
    Bh,
    None,
}

impl Correction {
    pub fn apply(self, p: &[f64]) -> Result<Vec<f64>> {
        match self {
            Correction::Holm => holm_bonferroni(p),
            Correction::Bh => benjamini_hochberg(p),
            Correction::None => {
                validate(p)?;
                Ok(p.to_vec())
            }
        }
    }
}

fn validate(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid("no p-values to adjust"));
    }
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("p-value {bad} outside [0, 1]")));
    }
    Ok(())
}

fn ascending(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    idx
}

/// Sorted ascending, `adj_(i) = min(1, max_{k <= i} (m - k + 1) p_(k))`.
pub fn holm_bonferroni(p: &[f64]) -> Result<Vec<f64>> {
    validate(p)?;
    let m = p.len();
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (k, &i) in ascending(p).iter().enumerate() {
        running = running.max((m - k) as f64 * p[i]);
        out[i] = running.min(1.0);
    }
    Ok(out)
}

/// Sorted ascending, `adj_(i) = min(1, min_{k >= i} m p_(k) / k)`.
pub fn benjamini_hochberg(p: &[f64]) -> Result<Vec<f64>> {
    validate(p)?;
    let m = p.len();
    let mut out = vec![0.0; m];
    let mut running = 1.0f64;
    for (k, &i) in ascending(p).iter().enumerate().rev() {
        running = running.min(m as f64 * p[i] / (k + 1) as f64);
        // `m p / m` can round below `p`; the exact value never is.
        out[i] = running.max(p[i]);
    }
    Ok(out)
}
