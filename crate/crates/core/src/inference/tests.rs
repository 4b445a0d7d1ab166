// SPDX-License-Identifier: MIT OR Apache-2.0

use super::*;
use crate::detect::Stopping;
use crate::selection::grid_oracle_selection_set;
use crate::series::{simulate_series, MeanModel, NoiseSpec};
use proptest::prelude::*;

const Z975: f64 = 1.959_964;

fn iv(lo: f64, hi: f64) -> PhiIntervalUnion {
    PhiIntervalUnion::from_intervals(vec![PhiInterval::new(lo, hi).unwrap()])
}

fn unit() -> PhiLaw {
    PhiLaw::new(1.0).unwrap()
}

fn h0(len: usize, seed: u64) -> Series {
    simulate_series(
        &MeanModel::constant(len, 0.0).unwrap(),
        &NoiseSpec::gaussian(1.0).unwrap(),
        seed,
    )
}

#[test]
fn union_probability_examples() {
    for sd in [0.3, 1.0, 7.0] {
        assert_eq!(interval_union_prob(&PhiLaw::new(sd).unwrap(), &PhiIntervalUnion::real_line()), 1.0);
    }
    assert!((interval_union_prob(&unit(), &iv(0.0, f64::INFINITY)) - 0.5).abs() < 1e-15);
    let tails = PhiIntervalUnion::two_sided_tails(Z975);
    assert!((interval_union_prob(&unit(), &tails) - 0.05).abs() < 1e-6);
    assert_eq!(interval_union_prob(&unit(), &PhiIntervalUnion::empty()), 0.0);
    assert!(PhiLaw::new(0.0).is_err());
}

#[test]
fn exceedance_examples() {
    let law = unit();
    assert_eq!(exceedance_prob(&law, &PhiIntervalUnion::real_line(), 0.0), 1.0);
    for c in [0.5, 2.0, 6.0] {
        let u = iv(c, f64::INFINITY);
        assert_eq!(exceedance_prob(&law, &u, c), interval_union_prob(&law, &u));
    }
    assert_eq!(exceedance_prob(&law, &iv(-1.0, 1.0), 2.0), 0.0);
}

#[test]
fn p_for_sample_examples() {
    let law = unit();
    let s = p_for_sample(&law, &PhiIntervalUnion::real_line(), Z975);
    assert_eq!(s.w, 1.0);
    assert!((s.p.unwrap() - 0.05).abs() < 1e-6);

    let s = p_for_sample(&law, &iv(1.3, f64::INFINITY), 1.3);
    assert!((s.p.unwrap() - 1.0).abs() < 1e-15);

    let a = 2.5;
    let tails = PhiIntervalUnion::two_sided_tails(a);
    let s = p_for_sample(&law, &tails, 1.0);
    assert!((s.p.unwrap() - 1.0).abs() < 1e-15);

    let s = p_for_sample(&law, &PhiIntervalUnion::empty(), 1.0);
    assert_eq!(s.w, 0.0);
    assert!(s.p.is_none());
}

#[test]
fn far_tail_selection_keeps_a_finite_p_value() {
    // S sits 45 sd out; w underflows but the conditional p is well defined.
    let law = unit();
    let s = p_for_sample(&law, &iv(45.0, 46.0), 45.5);
    assert_eq!(s.w, 0.0);
    let p = s.p.unwrap();
    // P(Z >= 45.5 | 45 <= Z <= 46) ~ exp(-45.25 * 0.5) relative to the whole.
    assert!(p > 1e-11 && p < 1e-9, "p = {p}");
}

proptest! {
    #[test]
    fn p_is_monotone_in_c(
        lo in -6.0f64..0.0,
        width in 0.1f64..8.0,
        c1 in 0.0f64..5.0,
        dc in 0.0f64..3.0,
    ) {
        let s = iv(lo, lo + width);
        let law = unit();
        let a = p_for_sample(&law, &s, c1);
        let b = p_for_sample(&law, &s, c1 + dc);
        prop_assert!(b.p.unwrap() <= a.p.unwrap() + 1e-15);
        prop_assert!((0.0..=1.0).contains(&a.p.unwrap()));
    }
}

fn first_cp(x: &Series, cfg: &DetectorConfig) -> usize {
    cfg.prepare(x).unwrap().detect(x).unwrap().indices[0]
}

#[test]
fn n_one_is_the_observed_psi_p_value() {
    let x = h0(200, 3);
    let det = DetectorConfig::bs(Stopping::FixedCount(1));
    let tau = first_cp(&x, &det);
    let cfg = TestConfig::new(det.clone(), 10, 1, 1.0, 5);
    let report = estimate_p_value(&x, tau, &cfg).unwrap();
    assert_eq!(report.samples.len(), 1);
    assert_eq!(report.samples[0].psi_source, PsiSource::Observed);
    assert_eq!(report.p_hat, report.samples[0].prob.p.unwrap());

    // Independent check: the same p-value from the grid oracle's
    // membership, integrating the normal density over grid cells.
    let prep = PreparedSeries::new(&x, &det).unwrap();
    let setup = setup_test(&prep, tau, &cfg).unwrap();
    let n = 20_001;
    let grid = grid_oracle_selection_set(
        &setup.psi_obs,
        &setup.basis,
        &setup.contrast,
        &prep.detector,
        &setup.condition,
        &setup.domain,
        n,
    )
    .unwrap();
    let pts = crate::selection::grid_points(&setup.domain, n);
    let step = pts[1] - pts[0];
    let dens = |phi: f64| (-0.5 * (phi / setup.law.sd).powi(2)).exp();
    let (mut num, mut den) = (0.0, 0.0);
    for (phi, m) in pts.iter().zip(grid) {
        if m {
            den += dens(*phi) * step;
            if phi.abs() >= setup.phi_obs.abs() {
                num += dens(*phi) * step;
            }
        }
    }
    assert!((num / den - report.p_hat).abs() < 5e-3, "{} vs {}", num / den, report.p_hat);
}

#[test]
fn large_step_is_significant() {
    let x = Series::new([vec![0.0; 50], vec![8.0; 50]].concat()).unwrap();
    let noisy = Series::new(
        x.values()
            .iter()
            .zip(h0(100, 9).values())
            .map(|(a, b)| a + 0.1 * b)
            .collect(),
    )
    .unwrap();
    for series in [&x, &noisy] {
        let det = DetectorConfig::bs(Stopping::FixedCount(1));
        let tau = first_cp(series, &det);
        assert_eq!(tau, 50);
        let report = estimate_p_value(series, tau, &TestConfig::new(det, 10, 10, 1.0, 1)).unwrap();
        assert!(report.p_hat < 0.001, "p = {}", report.p_hat);
    }
}

#[test]
fn both_forms_agree_and_prefixes_match_fresh_runs() {
    let det = DetectorConfig::bs(Stopping::Threshold(2.5)).with_noise_scale(1.0);
    let model = MeanModel::new(150, vec![75], vec![0.0, 1.0]).unwrap();
    let mut checked = 0;
    for seed in 0..6 {
        let x = simulate_series(&model, &NoiseSpec::gaussian(1.0).unwrap(), seed);
        let prep = PreparedSeries::new(&x, &det).unwrap();
        for &tau in &prep.observed.indices {
            let cfg = TestConfig::new(det.clone(), 8, 10, 1.0, 77 + seed);
            let Ok(report) = test_changepoint(&prep, tau, &cfg) else { continue };
            assert!((report.p_hat - report.p_hat_ratio).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&report.p_hat));
            for n in [1, 3, 5] {
                let fresh = test_changepoint(&prep, tau, &TestConfig { n_samples: n, ..cfg.clone() }).unwrap();
                let prefix = report.p_hat_prefix(n).unwrap();
                assert_eq!(fresh.p_hat, prefix.p_hat);
                assert!((fresh.p_hat - fresh.p_hat_ratio).abs() < 1e-12);
            }
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn simulated_only_variant_has_no_observed_sample() {
    let x = h0(120, 21);
    let det = DetectorConfig::bs(Stopping::FixedCount(1));
    let tau = first_cp(&x, &det);
    let cfg = TestConfig {
        include_observed: false,
        ..TestConfig::new(det, 10, 5, 1.0, 4)
    };
    match estimate_p_value(&x, tau, &cfg) {
        Ok(r) => {
            assert_eq!(r.samples.len(), 5);
            assert!(r.samples.iter().all(|s| matches!(s.psi_source, PsiSource::Simulated { .. })));
        }
        Err(Error::Internal(_)) => {}
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn untested_changepoint_is_rejected() {
    let x = h0(100, 2);
    let det = DetectorConfig::bs(Stopping::FixedCount(1));
    let tau = first_cp(&x, &det);
    let other = if tau == 50 { 51 } else { 50 };
    assert!(matches!(
        estimate_p_value(&x, other, &TestConfig::new(det.clone(), 10, 1, 1.0, 0)),
        Err(Error::NotDetected(_))
    ));
    assert!(estimate_p_value(&x, tau, &TestConfig::new(det.clone(), 10, 0, 1.0, 0)).is_err());
    assert!(estimate_p_value(&x, tau, &TestConfig::new(det, 10, 1, -1.0, 0)).is_err());
}

#[test]
fn neighbour_policies_force_exact_match() {
    let model = MeanModel::new(120, vec![40, 80], vec![0.0, 3.0, 0.0]).unwrap();
    let x = simulate_series(&model, &NoiseSpec::gaussian(1.0).unwrap(), 8);
    let det = DetectorConfig::bs(Stopping::FixedCount(2));
    let prep = PreparedSeries::new(&x, &det).unwrap();
    let tau = prep.observed.indices[0];
    let cfg = TestConfig {
        window_policy: WindowPolicy::TruncateAtNeighbors,
        ..TestConfig::new(det, 10, 3, 1.0, 1)
    };
    let report = test_changepoint(&prep, tau, &cfg).unwrap();
    assert!(matches!(report.condition, SelectionCondition::ExactMatch(_)));
}

#[test]
fn reports_are_reproducible() {
    let x = h0(150, 31);
    let det = DetectorConfig::bs(Stopping::FixedCount(1));
    let tau = first_cp(&x, &det);
    let cfg = TestConfig::new(det, 10, 6, 1.0, 12);
    let a = estimate_p_value(&x, tau, &cfg).unwrap();
    let b = estimate_p_value(&x, tau, &cfg).unwrap();
    assert_eq!(a, b);
    let json = serde_json::to_string(&a).unwrap();
    assert!(json.contains("\"schema_version\":1"));
}

#[test]
fn l0_and_wbs_run_end_to_end() {
    let model = MeanModel::new(80, vec![40], vec![0.0, 2.0]).unwrap();
    let x = simulate_series(&model, &NoiseSpec::gaussian(1.0).unwrap(), 3);
    for det in [DetectorConfig::l0(8.0), DetectorConfig::wbs(Stopping::FixedCount(1), 50, 2)] {
        let tau = first_cp(&x, &det);
        let r = estimate_p_value(&x, tau, &TestConfig::new(det, 8, 4, 1.0, 3)).unwrap();
        assert!((r.p_hat - r.p_hat_ratio).abs() < 1e-12);
    }
}
