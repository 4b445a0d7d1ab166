// SPDX-License-Identifier: MIT OR Apache-2.0

//! Univariate series, piecewise-constant mean models and noise generators.
//!
//! Changepoint indices are 1-based and name the last observation of the
//! left segment: a change at `tau` means `mu[tau] != mu[tau + 1]`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Observed or simulated data, at least two finite values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    values: Vec<f64>,
}

impl Series {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "series needs at least 2 observations, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at index {}", i + 1)));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Piecewise-constant mean with `K` changepoints and `K + 1` segment means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanModel {
    len: usize,
    changepoints: Vec<usize>,
    segment_means: Vec<f64>,
}

impl MeanModel {
    pub fn new(len: usize, changepoints: Vec<usize>, segment_means: Vec<f64>) -> Result<Self> {
        if len < 2 {
            return Err(Error::invalid("mean model needs T >= 2"));
        }
        if segment_means.len() != changepoints.len() + 1 {
            return Err(Error::invalid(format!(
                "{} changepoints need {} segment means, got {}",
                changepoints.len(),
                changepoints.len() + 1,
                segment_means.len()
            )));
        }
        if changepoints.iter().any(|&c| c < 1 || c >= len) {
            return Err(Error::invalid("changepoints must lie in [1, T-1]"));
        }
        if changepoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("changepoints must be strictly increasing"));
        }
        if segment_means.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("segment means must be finite"));
        }
        if segment_means.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("adjacent segment means must differ"));
        }
        Ok(Self {
            len,
            changepoints,
            segment_means,
        })
    }

    /// Constant mean, no changepoints.
    pub fn constant(len: usize, mean: f64) -> Result<Self> {
        Self::new(len, Vec::new(), vec![mean])
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn changepoints(&self) -> &[usize] {
        &self.changepoints
    }

    pub fn segment_means(&self) -> &[f64] {
        &self.segment_means
    }

    /// Length-T mean vector.
    pub fn expand(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len);
        let mut start = 0;
        for (k, &mean) in self.segment_means.iter().enumerate() {
            let end = self.changepoints.get(k).copied().unwrap_or(self.len);
            out.extend(std::iter::repeat_n(mean, end - start));
            start = end;
        }
        out
    }
}

/// `K` equally spaced changes at `round(k T / (K + 1))`, means alternating
/// `+amplitude, -amplitude, ...`.
pub fn make_alternating_model(len: usize, count: usize, amplitude: f64) -> Result<MeanModel> {
    if count >= len {
        return Err(Error::invalid(format!(
            "cannot place {count} changepoints in a series of length {len}"
        )));
    }
    if !(amplitude.is_finite() && amplitude != 0.0) {
        return Err(Error::invalid("amplitude must be finite and non-zero"));
    }
    let changepoints: Vec<usize> = (1..=count)
        .map(|k| ((k * len) as f64 / (count + 1) as f64).round() as usize)
        .collect();
    let means = (0..=count)
        .map(|k| if k % 2 == 0 { amplitude } else { -amplitude })
        .collect();
    MeanModel::new(len, changepoints, means)
}

/// Noise distribution family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    StudentT { dof: f64 },
    Laplace { scale: f64 },
}

/// I.i.d. noise specification. `sigma` scales Gaussian noise only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub sigma: f64,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(NoiseFamily::Gaussian, sigma)
    }

    pub fn student_t(dof: f64) -> Result<Self> {
        Self::new(NoiseFamily::StudentT { dof }, 1.0)
    }

    pub fn laplace(scale: f64) -> Result<Self> {
        Self::new(NoiseFamily::Laplace { scale }, 1.0)
    }

    pub fn new(family: NoiseFamily, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid("noise sigma must be positive"));
        }
        match family {
            NoiseFamily::StudentT { dof } if !(dof.is_finite() && dof > 2.0) => {
                return Err(Error::invalid("student-t noise needs dof > 2"))
            }
            NoiseFamily::Laplace { scale } if !(scale.is_finite() && scale > 0.0) => {
                return Err(Error::invalid("laplace noise needs scale > 0"))
            }
            _ => {}
        }
        Ok(Self { family, sigma })
    }

    /// Standard deviation of a single noise draw.
    pub fn std_dev(&self) -> f64 {
        match self.family {
            NoiseFamily::Gaussian => self.sigma,
            NoiseFamily::StudentT { dof } => (dof / (dof - 2.0)).sqrt(),
            NoiseFamily::Laplace { scale } => scale * std::f64::consts::SQRT_2,
        }
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            NoiseFamily::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.sigma * z
            }
            NoiseFamily::StudentT { dof } => StudentT::new(dof)
                .expect("dof validated at construction")
                .sample(rng),
            NoiseFamily::Laplace { scale } => {
                // Inverse CDF on u in (-1/2, 1/2).
                let u: f64 = rng.random::<f64>() - 0.5;
                let tail = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
                -scale * u.signum() * tail.ln()
            }
        }
    }
}

/// Mean vector plus i.i.d. noise; a pure function of its arguments.
pub fn simulate_series(model: &MeanModel, noise: &NoiseSpec, seed: u64) -> Series {
    let mut rng = rng::stream(seed, &[]);
    let values = model
        .expand()
        .into_iter()
        .map(|mu| mu + noise.draw(&mut rng))
        .collect();
    Series { values }
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Gaussian-consistent scaling of the median absolute deviation.
pub const MAD_SCALE: f64 = 1.4826;

/// Noise scale from the median absolute deviation of lag-1 differences,
/// `1.4826 * median(|d - median(d)|) / sqrt(2)`. Returns 0 for a series
/// whose differences have zero spread.
pub fn estimate_sigma_mad(series: &Series) -> f64 {
    let mut diffs: Vec<f64> = series.values.windows(2).map(|w| w[1] - w[0]).collect();
    let centre = median(&mut diffs);
    let mut dev: Vec<f64> = diffs.iter().map(|d| (d - centre).abs()).collect();
    MAD_SCALE * median(&mut dev) / std::f64::consts::SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_rejects_short_and_non_finite() {
        assert!(Series::new(vec![1.0]).is_err());
        assert!(Series::new(vec![1.0, f64::NAN]).is_err());
        assert!(Series::new(vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn simulate_is_deterministic() {
        let model = MeanModel::constant(4, 0.0).unwrap();
        let noise = NoiseSpec::gaussian(1.0).unwrap();
        let a = simulate_series(&model, &noise, 11);
        let b = simulate_series(&model, &noise, 11);
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.values().iter().all(|v| v.is_finite()));
        assert_ne!(a, simulate_series(&model, &noise, 12));
    }

    #[test]
    fn single_change_mean_vector() {
        let model = MeanModel::new(1000, vec![500], vec![0.0, 2.0]).unwrap();
        let mu = model.expand();
        assert_eq!(mu.len(), 1000);
        assert!(mu[..500].iter().all(|&m| m == 0.0));
        assert!(mu[500..].iter().all(|&m| m == 2.0));
    }

    #[test]
    fn four_change_mean_vector() {
        let model =
            MeanModel::new(1000, vec![100, 400, 500, 700], vec![1.0, -1.0, 1.0, -1.0, 1.0])
                .unwrap();
        let mu = model.expand();
        let jumps: Vec<usize> = (1..1000).filter(|&t| mu[t] != mu[t - 1]).collect();
        assert_eq!(jumps, vec![100, 400, 500, 700]);
    }

    #[test]
    fn alternating_models() {
        let m = make_alternating_model(1000, 1, 1.0).unwrap();
        assert_eq!(m.changepoints(), &[500]);
        assert_eq!(m.segment_means(), &[1.0, -1.0]);

        let m = make_alternating_model(1000, 4, 1.0).unwrap();
        assert_eq!(m.changepoints(), &[200, 400, 600, 800]);
        assert_eq!(m.segment_means(), &[1.0, -1.0, 1.0, -1.0, 1.0]);

        let m = make_alternating_model(10, 0, 1.0).unwrap();
        assert!(m.changepoints().is_empty());
        assert_eq!(m.segment_means(), &[1.0]);

        assert!(make_alternating_model(10, 10, 1.0).is_err());
    }

    #[test]
    fn mean_model_validation() {
        assert!(MeanModel::new(10, vec![0], vec![0.0, 1.0]).is_err());
        assert!(MeanModel::new(10, vec![10], vec![0.0, 1.0]).is_err());
        assert!(MeanModel::new(10, vec![5, 3], vec![0.0, 1.0, 0.0]).is_err());
        assert!(MeanModel::new(10, vec![5], vec![0.0]).is_err());
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseSpec::gaussian(0.0).is_err());
        assert!(NoiseSpec::student_t(2.0).is_err());
        assert!(NoiseSpec::laplace(-1.0).is_err());
        assert!((NoiseSpec::student_t(5.0).unwrap().std_dev() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mad_constant_series_is_zero() {
        let s = Series::new(vec![5.0; 4]).unwrap();
        assert_eq!(estimate_sigma_mad(&s), 0.0);
    }

    #[test]
    fn mad_alternating_series() {
        // Odd number of differences: median(d) = 1, every |d - 1| is 0 or 2
        // with 0 in the majority.
        let s = Series::new(vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(estimate_sigma_mad(&s), 0.0);
        // Even number of differences: median(d) = 0 and every |d| = 1.
        let s = Series::new(vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let expected = 1.4826 / std::f64::consts::SQRT_2;
        assert!((estimate_sigma_mad(&s) - expected).abs() < 1e-12);
        assert!((expected - 1.04835).abs() < 1e-5);
    }

    #[test]
    fn mad_is_consistent_for_gaussian_noise() {
        let model = MeanModel::constant(10_000, 0.0).unwrap();
        let s = simulate_series(&model, &NoiseSpec::gaussian(1.0).unwrap(), 2024);
        let sigma = estimate_sigma_mad(&s);
        assert!((0.95..=1.05).contains(&sigma), "sigma_hat = {sigma}");
    }

    #[test]
    fn laplace_draws_have_expected_spread() {
        let noise = NoiseSpec::laplace(0.5).unwrap();
        let mut rng = rng::stream(3, &[]);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| noise.draw(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01);
        assert!((var.sqrt() / noise.std_dev() - 1.0).abs() < 0.02);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mad_shift_invariant(vals in prop::collection::vec(-10.0f64..10.0, 8..40), shift in -100.0f64..100.0) {
                let s = Series::new(vals.clone()).unwrap();
                let shifted = Series::new(vals.iter().map(|v| v + shift).collect()).unwrap();
                prop_assert!((estimate_sigma_mad(&s) - estimate_sigma_mad(&shifted)).abs() < 1e-9);
            }

            #[test]
            fn alternating_model_has_k_jumps(len in 10usize..300, k in 0usize..9, amp in 0.1f64..5.0) {
                prop_assume!(k < len / 2);
                let m = make_alternating_model(len, k, amp).unwrap();
                let mu = m.expand();
                let jumps: Vec<f64> = mu.windows(2).map(|w| w[1] - w[0]).filter(|d| *d != 0.0).collect();
                prop_assert_eq!(jumps.len(), k);
                for d in jumps {
                    prop_assert!((d.abs() - 2.0 * amp).abs() < 1e-12);
                }
            }
        }
    }
}
