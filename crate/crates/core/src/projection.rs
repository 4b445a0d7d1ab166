// SPDX-License-Identifier: MIT OR Apache-2.0

//! Test-statistic and nuisance coordinates around a detected changepoint.
//!
//! For a window `(tau - h1, tau + h2]` the data splits into four mutually
//! orthogonal parts: everything outside the window, the window mean (along
//! `a`), the difference of half-window means (along the contrast `nu`, the
//! coordinate `phi`), and the remaining `h1 + h2 - 2` within-half
//! fluctuations (along the columns of `U`, the coordinates `psi`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Series;

/// How the half-window sizes are chosen from the detected changepoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowPolicy {
    /// `(h, h)`.
    FixedH,
    /// `h` on each side, cut short at a neighbouring changepoint.
    TruncateAtNeighbors,
    /// The full gaps to the neighbouring changepoints.
    BetweenNeighbors,
    /// Half of each gap, rounded down.
    Midpoint,
}

impl WindowPolicy {
    /// Policies that depend on the neighbouring changepoints require
    /// conditioning on the whole detected set.
    pub fn needs_exact_match(self) -> bool {
        !matches!(self, WindowPolicy::FixedH)
    }
}

/// Test window `(tau_hat - h1, tau_hat + h2]`, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub tau_hat: usize,
    pub h1: usize,
    pub h2: usize,
    pub policy: WindowPolicy,
}

impl Window {
    pub fn new(tau_hat: usize, h1: usize, h2: usize, len: usize) -> Result<Self> {
        let w = Self {
            tau_hat,
            h1,
            h2,
            policy: WindowPolicy::FixedH,
        };
        w.check(len)?;
        Ok(w)
    }

    /// Window for the `j`-th (0-based) of the sorted `changepoints`, with
    /// both halves clipped to the data.
    pub fn for_changepoint(
        changepoints: &[usize],
        j: usize,
        h: usize,
        policy: WindowPolicy,
        len: usize,
    ) -> Result<Self> {
        let tau = *changepoints
            .get(j)
            .ok_or_else(|| Error::invalid(format!("no changepoint with index {j}")))?;
        if tau < 1 || tau >= len {
            return Err(Error::InvalidWindow(format!("changepoint {tau} outside [1, {}]", len - 1)));
        }
        let prev = if j == 0 { 0 } else { changepoints[j - 1] };
        let next = changepoints.get(j + 1).copied().unwrap_or(len);
        let (gap_left, gap_right) = (tau - prev, next - tau);
        let (h1, h2) = match policy {
            WindowPolicy::FixedH => (h, h),
            WindowPolicy::TruncateAtNeighbors => (h.min(gap_left), h.min(gap_right)),
            WindowPolicy::BetweenNeighbors => (gap_left, gap_right),
            WindowPolicy::Midpoint => (gap_left / 2, gap_right / 2),
        };
        let w = Self {
            tau_hat: tau,
            h1: h1.min(tau),
            h2: h2.min(len - tau),
            policy,
        };
        w.check(len)?;
        Ok(w)
    }

    fn check(&self, len: usize) -> Result<()> {
        if self.h1 == 0 || self.h2 == 0 {
            return Err(Error::InvalidWindow(format!(
                "empty half-window (h1 = {}, h2 = {}) at {}",
                self.h1, self.h2, self.tau_hat
            )));
        }
        if self.tau_hat < self.h1 || self.tau_hat + self.h2 > len {
            return Err(Error::InvalidWindow(format!(
                "window ({}, {}] does not fit in a series of length {len}",
                self.tau_hat as i64 - self.h1 as i64,
                self.tau_hat + self.h2
            )));
        }
        Ok(())
    }

    /// 0-based index of the first observation in the window.
    pub fn start(&self) -> usize {
        self.tau_hat - self.h1
    }

    /// 0-based exclusive end of the window.
    pub fn end(&self) -> usize {
        self.tau_hat + self.h2
    }

    pub fn size(&self) -> usize {
        self.h1 + self.h2
    }

    /// Number of nuisance coordinates, `h1 + h2 - 2`.
    pub fn nuisance_dim(&self) -> usize {
        self.size() - 2
    }
}

/// Difference-of-means contrast `nu`.
#[derive(Clone, Debug, PartialEq)]
pub struct Contrast {
    pub window: Window,
    pub nu: Vec<f64>,
    /// `||nu||^2 = 1/h1 + 1/h2`.
    pub norm_sq: f64,
}

pub fn build_contrast(window: &Window, len: usize) -> Result<Contrast> {
    window.check(len)?;
    let mut nu = vec![0.0; len];
    let (left, right) = (1.0 / window.h1 as f64, -1.0 / window.h2 as f64);
    nu[window.start()..window.tau_hat].fill(left);
    nu[window.tau_hat..window.end()].fill(right);
    Ok(Contrast {
        window: *window,
        nu,
        norm_sq: 1.0 / window.h1 as f64 + 1.0 / window.h2 as f64,
    })
}

impl Contrast {
    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    /// `nu^T x`.
    pub fn apply(&self, x: &[f64]) -> f64 {
        let w = &self.window;
        let left: f64 = x[w.start()..w.tau_hat].iter().sum::<f64>() / w.h1 as f64;
        let right: f64 = x[w.tau_hat..w.end()].iter().sum::<f64>() / w.h2 as f64;
        left - right
    }
}

/// Orthonormal basis of the within-window directions orthogonal to both the
/// window mean and the contrast, together with the conditioned part of the
/// observed data.
///
/// The columns are Helmert contrasts within each half: for a half of size
/// `m` starting at `o`, column `k` (`1 <= k < m`) has `1/sqrt(k(k+1))` on
/// `o..o+k`, `-k/sqrt(k(k+1))` at `o+k` and zero elsewhere. This is the
/// Gram-Schmidt orthogonalisation of the half's coordinate directions
/// against its constant vector, so it is deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct NuisanceBasis {
    window: Window,
    len: usize,
    /// `(offset within window, k)` per column, left half first.
    columns: Vec<(usize, usize)>,
    /// `(a a^T / ||a||^2 + B B^T) x_obs`.
    pub fixed_part: Vec<f64>,
}

pub fn build_nuisance_basis(window: &Window, series_obs: &Series) -> Result<NuisanceBasis> {
    let len = series_obs.len();
    window.check(len)?;
    let x = series_obs.values();
    let mut columns = Vec::with_capacity(window.nuisance_dim());
    columns.extend((1..window.h1).map(|k| (0, k)));
    columns.extend((1..window.h2).map(|k| (window.h1, k)));

    let mut fixed_part = x.to_vec();
    let range = window.start()..window.end();
    let mean = x[range.clone()].iter().sum::<f64>() / window.size() as f64;
    fixed_part[range].fill(mean);
    Ok(NuisanceBasis {
        window: *window,
        len,
        columns,
        fixed_part,
    })
}

impl NuisanceBasis {
    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of columns of `U`.
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// Entries of column `j` over the window, as `(window offset, value)`.
    fn column_entries(&self, j: usize) -> impl Iterator<Item = (usize, f64)> {
        let (offset, k) = self.columns[j];
        let scale = 1.0 / ((k * (k + 1)) as f64).sqrt();
        (0..=k).map(move |i| {
            let v = if i < k { scale } else { -(k as f64) * scale };
            (offset + i, v)
        })
    }

    /// Column `j` of `U` as a length-T vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        let start = self.window.start();
        for (i, v) in self.column_entries(j) {
            out[start + i] = v;
        }
        out
    }

    /// `U^T x`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let start = self.window.start();
        (0..self.dim())
            .map(|j| self.column_entries(j).map(|(i, v)| v * x[start + i]).sum())
            .collect()
    }

    /// `U psi` added into `out`.
    pub fn add_span(&self, psi: &[f64], out: &mut [f64]) {
        let start = self.window.start();
        for (j, &p) in psi.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (i, v) in self.column_entries(j) {
                out[start + i] += v * p;
            }
        }
    }
}

/// `(phi, psi)` coordinates of a series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiPsiCoords {
    pub phi: f64,
    pub psi: Vec<f64>,
}

fn check_dims(basis: &NuisanceBasis, contrast: &Contrast, n: usize) -> Result<()> {
    for got in [basis.len, contrast.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    if basis.window != contrast.window {
        return Err(Error::invalid("basis and contrast were built for different windows"));
    }
    Ok(())
}

/// `phi = nu^T x`, `psi = U^T x`.
pub fn decompose(series: &Series, basis: &NuisanceBasis, contrast: &Contrast) -> Result<PhiPsiCoords> {
    check_dims(basis, contrast, series.len())?;
    Ok(PhiPsiCoords {
        phi: contrast.apply(series.values()),
        psi: basis.project(series.values()),
    })
}

/// `U psi + nu phi / ||nu||^2 + fixed_part`.
pub fn reconstruct(coords: &PhiPsiCoords, basis: &NuisanceBasis, contrast: &Contrast) -> Result<Series> {
    check_dims(basis, contrast, basis.len)?;
    if coords.psi.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: coords.psi.len(),
        });
    }
    if !coords.phi.is_finite() || coords.psi.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("coordinates must be finite"));
    }
    let mut out = basis.fixed_part.clone();
    let scale = coords.phi / contrast.norm_sq;
    let w = &contrast.window;
    for t in w.start()..w.end() {
        out[t] += contrast.nu[t] * scale;
    }
    basis.add_span(&coords.psi, &mut out);
    Series::new(out)
}
