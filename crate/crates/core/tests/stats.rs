use std::f64::consts::PI;

use num_complex::Complex64;
use zeroscope::kernels::{ModelKind, Truncation};
use zeroscope::observables::{RegionSpec, TestFunction};
use zeroscope::solver::{roots_univariate, ZeroSet};
use zeroscope::special::ZETA_3;
use zeroscope::stats::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn roots_of_unity() -> ZeroSet {
    roots_univariate(&[c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap()
}

fn campaign(model: ModelKind, degree: u32, trials: usize, seed: u64, statistics: Vec<Statistic>) -> CampaignOutcome {
    run_campaign(&CampaignConfig {
        model,
        degree,
        trials,
        master_seed: seed,
        statistics,
    })
    .unwrap()
}

#[test]
fn smooth_statistic_examples() {
    let zs = roots_of_unity();
    let v = smooth_statistic(&zs, &TestFunction::gauss(c(0.0, 0.0), 1.0));
    assert!((v - 4.0 * (-1.0f64).exp()).abs() < 1e-12);
    // a bump much wider than the roots acts as the constant 1 up to O(1/R²)
    let wide = smooth_statistic(&zs, &TestFunction::poly4(c(0.0, 0.0), 1e6));
    assert!((wide - 4.0).abs() < 1e-10);
    assert_eq!(numerical_statistic(&zs, &RegionSpec::disk(c(0.0, 0.0), 1.5)), 4);
    assert_eq!(Statistic::Count.evaluate(&zs), 4.0);
}

#[test]
fn smooth_statistic_mean_matches_equidistribution() {
    // (N/π) ∫ e^{−|z|²} ω_FS = N (1 − e E₁(1))
    let n = 100;
    let one_minus_e_e1 = 1.0 - std::f64::consts::E * 0.219_383_934_395_520_27;
    let stat = Statistic::Smooth(TestFunction::gauss(c(0.0, 0.0), 1.0));
    assert!((stat.expected_mean(ModelKind::Elliptic, n) - f64::from(n) * one_minus_e_e1).abs() < 1e-8);
    let out = campaign(ModelKind::Elliptic, n, 4000, 3, vec![stat]);
    let x = out.successes(0);
    let m = Moments::from_sample(&x).unwrap();
    let se = (m.var / x.len() as f64).sqrt();
    assert!(
        (m.mean - f64::from(n) * one_minus_e_e1).abs() <= 3.0 * se,
        "{} ± {se}",
        m.mean
    );
}

#[test]
fn campaigns_are_deterministic() {
    let stats = vec![
        Statistic::Smooth(TestFunction::gauss(c(0.0, 0.0), 1.0)),
        Statistic::Numerical(RegionSpec::disk(c(0.0, 0.0), 1.0)),
    ];
    let a = campaign(ModelKind::Elliptic, 30, 100, 11, stats.clone());
    let b = campaign(ModelKind::Elliptic, 30, 100, 11, stats.clone());
    assert_eq!(a.values, b.values);
    let other = campaign(ModelKind::Elliptic, 30, 100, 12, stats);
    assert_ne!(a.values, other.values);
}

#[test]
fn campaign_preconditions() {
    let cfg = CampaignConfig {
        model: ModelKind::Elliptic,
        degree: 10,
        trials: 99,
        master_seed: 1,
        statistics: vec![Statistic::Count],
    };
    assert_eq!(run_campaign(&cfg).unwrap_err(), StatsError::TooFewTrials(99));
    let bad_region = CampaignConfig {
        trials: 100,
        statistics: vec![Statistic::Numerical("pdisk:0:1:0:1".parse().unwrap())],
        ..cfg
    };
    assert!(matches!(run_campaign(&bad_region), Err(StatsError::Spec(_))));
}

#[test]
fn exponent_fit() {
    let degrees = [64u32, 128, 256, 512];
    for s in [-1.0, 0.5, 1.5, 0.0] {
        let vars: Vec<f64> = degrees.iter().map(|&d| 0.3 * f64::from(d).powf(s)).collect();
        let (slope, err) = variance_exponent_fit(&degrees, &vars).unwrap();
        assert!((slope - s).abs() <= 1e-12);
        assert!(err <= 1e-12);
    }
    assert_eq!(
        variance_exponent_fit(&degrees, &[1.0, 2.0, -1.0, 3.0]),
        Err(StatsError::NonPositiveVariance(2))
    );
    assert!(matches!(
        variance_exponent_fit(&degrees[..3], &[1.0, 2.0, 3.0]),
        Err(StatsError::TooFewPoints { need: 4, got: 3 })
    ));
}

#[test]
fn moment_examples() {
    let m = Moments::from_sample(&[1.0, 2.0, 3.0]).unwrap();
    assert_eq!((m.mean, m.var), (2.0, 1.0));
    assert_eq!(m.central[0], 0.0);
    // stability: a large offset leaves the central moments alone
    let x: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
    let shifted: Vec<f64> = x.iter().map(|v| v + 1e9).collect();
    let (a, b) = (
        Moments::from_sample(&x).unwrap(),
        Moments::from_sample(&shifted).unwrap(),
    );
    assert!((a.var - b.var).abs() <= 1e-6 * a.var);
    assert!((a.skew - b.skew).abs() <= 1e-4);
    assert!((a.kurt_excess - b.kurt_excess).abs() <= 1e-4);
}

#[test]
fn summary_of_empty_and_tiny_samples() {
    let s = Summary::from_trials(&[], 1);
    assert_eq!((s.trials, s.failed), (0, 0));
    assert!(s.mean.is_none() && s.var.is_none() && s.ks.is_none());
    let s = Summary::from_trials(&[Some(1.0), None, Some(2.0), Some(3.0)], 1);
    assert_eq!((s.trials, s.failed), (4, 1));
    assert_eq!((s.mean, s.var), (Some(2.0), Some(1.0)));
}

#[test]
fn ks_of_normal_quantiles_is_small() {
    let n = 2000;
    let x: Vec<f64> = (0..n)
        .map(|i| statrs::function::erf::erf_inv(2.0 * (i as f64 + 0.5) / n as f64 - 1.0) * 2f64.sqrt())
        .collect();
    assert!(ks_normal(&x).unwrap() < 0.01);
    let uniform: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    assert!(ks_normal(&uniform).unwrap() > 0.05);
    // a lattice sample gets jittered, a continuous one does not
    let lattice: Vec<f64> = x.iter().map(|v| (3.0 * v).round()).collect();
    assert!(is_lattice(&lattice));
    assert!(ks_normal_continuity(&lattice, 4).unwrap() < ks_normal(&lattice).unwrap());
    assert_eq!(ks_normal_continuity(&x, 4), ks_normal(&x));
}

#[test]
fn oracle_of_a_harmonic_test_function_is_zero() {
    // φ = Re z has φ_{zz̄} ≡ 0
    let region = OracleRegion {
        center: c(0.0, 0.0),
        reach: 1.0,
        radial: true,
    };
    for n in [Truncation::Order(1), Truncation::Full] {
        let v = variance_oracle_density(ModelKind::Elliptic, 64, &region, |_| 0.0, n).unwrap();
        assert_eq!(v, 0.0);
    }
    assert!(matches!(
        variance_oracle_smooth(
            ModelKind::ProductElliptic2,
            4,
            &TestFunction::gauss(c(0.0, 0.0), 1.0),
            Truncation::Full
        ),
        Err(StatsError::Unsupported(_))
    ));
}

#[test]
fn truncated_oracles_increase_with_order() {
    let phi = TestFunction::gauss(c(0.0, 0.0), 1.0);
    let v: Vec<f64> = [Truncation::Order(1), Truncation::Order(3), Truncation::Full]
        .iter()
        .map(|&n| variance_oracle_smooth(ModelKind::Elliptic, 64, &phi, n).unwrap())
        .collect();
    assert!(v[0] < v[1] && v[1] < v[2]);
}

#[test]
fn prediction_for_the_unit_gaussian() {
    // ‖∂∂̄φ‖² = 4∫ φ_{zz̄}² (1+|z|²)² dA = 3π for e^{−|z|²}
    let phi = TestFunction::gauss(c(0.0, 0.0), 1.0);
    let expected = ZETA_3 / (4.0 * PI) * 3.0 * PI / 256.0;
    assert!((variance_prediction(ModelKind::Elliptic, 256, &phi) / expected - 1.0).abs() < 1e-6);
    let oracle = variance_oracle_smooth(ModelKind::Elliptic, 256, &phi, Truncation::Full).unwrap();
    let ratio = oracle / expected;
    assert!((ratio - 1.0).abs() <= 0.2, "ratio {ratio}");
}

fn oracle_vs_monte_carlo(degree: u32, trials: usize, seed: u64) {
    let phis = [
        TestFunction::gauss(c(0.0, 0.0), 1.0),
        TestFunction::gauss(c(0.5, 0.2), 0.7),
        TestFunction::poly4(c(0.0, 0.0), 1.5),
    ];
    let stats = phis.iter().cloned().map(Statistic::Smooth).collect();
    let out = campaign(ModelKind::Elliptic, degree, trials, seed, stats);
    for (i, phi) in phis.iter().enumerate() {
        let mc = Moments::from_sample(&out.successes(i)).unwrap().var;
        let oracle = variance_oracle_smooth(ModelKind::Elliptic, degree, phi, Truncation::Full).unwrap();
        let rel = (mc / oracle - 1.0).abs();
        assert!(rel <= 0.05, "N={degree} {phi}: MC {mc:e} oracle {oracle:e}");
    }
}

#[test]
fn oracle_matches_monte_carlo_at_64() {
    oracle_vs_monte_carlo(64, 10_000, 64);
}

#[test]
fn oracle_matches_monte_carlo_at_256() {
    oracle_vs_monte_carlo(256, 4000, 256);
}
