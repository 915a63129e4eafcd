use num_complex::Complex64;
use zeroscope::gaussian::SeedPath;
use zeroscope::kernels::{KernelError, ModelKind};
use zeroscope::quadrature::PolarGrid;
use zeroscope::sampler::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn coefficient_counts() {
    let s = SeedPath::new(1, 0, 0);
    assert_eq!(sample_section(ModelKind::Elliptic, 3, s).unwrap().coeffs().len(), 4);
    assert_eq!(
        sample_section(ModelKind::ProductElliptic2, 2, s)
            .unwrap()
            .coeffs()
            .len(),
        9
    );
    for model in [ModelKind::Flat, ModelKind::Hyperbolic] {
        let sampler = SectionSampler::new(model, 20).unwrap();
        assert_eq!(sampler.coefficient_count(), sampler.basis().len());
        assert!(sampler.coefficient_count() > 21);
    }
}

#[test]
fn sampling_is_deterministic() {
    let sampler = SectionSampler::new(ModelKind::Hyperbolic, 15).unwrap();
    let a = sampler.sample(SeedPath::new(4, 9, 0));
    let b = sampler.sample(SeedPath::new(4, 9, 0));
    assert_eq!(a.coeffs(), b.coeffs());
    assert_ne!(a.coeffs(), sampler.sample(SeedPath::new(4, 10, 0)).coeffs());
}

#[test]
fn field_has_unit_variance() {
    let sampler = SectionSampler::new(ModelKind::Elliptic, 50).unwrap();
    let z = [c(0.7, 0.2)];
    let t = 100_000u64;
    let mean = (0..t)
        .map(|i| {
            sampler
                .sample(SeedPath::new(12, i, 0))
                .eval_field(&z)
                .unwrap()
                .norm_sqr()
        })
        .sum::<f64>()
        / t as f64;
    assert!((mean - 1.0).abs() <= 4.0 / (t as f64).sqrt(), "{mean}");
}

#[test]
fn elliptic_field_at_origin_is_first_coefficient() {
    for n in [1u32, 7, 64, 300] {
        let s = sample_section(ModelKind::Elliptic, n, SeedPath::new(2, u64::from(n), 0)).unwrap();
        assert!((s.eval_field(&[c(0.0, 0.0)]).unwrap() - s.coeffs()[0]).norm() < 1e-14);
    }
}

#[test]
fn grid_evaluation_matches_pointwise() {
    let s = sample_section(ModelKind::Elliptic, 256, SeedPath::new(3, 0, 0)).unwrap();
    let grid: Vec<Complex64> = (0..10_000)
        .map(|i| {
            let t = i as f64;
            c(3.0 * (0.37 * t).sin(), 3.0 * (0.11 * t).cos())
        })
        .collect();
    let batch = s.eval_field_grid(&grid).unwrap();
    assert_eq!(batch.len(), grid.len());
    for i in (0..grid.len()).step_by(100) {
        let single = s.eval_field(&[grid[i]]).unwrap();
        assert!((batch[i] - single).norm() <= 1e-12);
    }
    assert!(s.eval_field_grid(&[]).unwrap().is_empty());
    let one = s.eval_field_grid(&[c(0.2, 0.1)]).unwrap();
    assert_eq!(one, vec![s.eval_field(&[c(0.2, 0.1)]).unwrap()]);
}

#[test]
fn out_of_chart_points_are_rejected() {
    let h = sample_section(ModelKind::Hyperbolic, 5, SeedPath::new(1, 0, 0)).unwrap();
    assert!(matches!(h.eval_field(&[c(1.0, 0.0)]), Err(KernelError::OutOfChart(_))));
    assert!(h.eval_field_grid(&[c(0.1, 0.0), c(0.0, 1.5)]).is_err());
    let e = sample_section(ModelKind::Elliptic, 5, SeedPath::new(1, 0, 0)).unwrap();
    assert!(e.eval_field(&[c(f64::NAN, 0.0)]).is_err());
    assert!(matches!(
        e.eval_field(&[c(0.0, 0.0); 2]),
        Err(KernelError::DimensionMismatch { .. })
    ));
}

#[test]
fn modulus_is_frame_independent() {
    // the chart at infinity sees the reversed coefficient vector
    let sampler = SectionSampler::new(ModelKind::Elliptic, 40).unwrap();
    let s = sampler.sample(SeedPath::new(7, 0, 0));
    let reversed: Vec<Complex64> = s.coeffs().iter().rev().copied().collect();
    let r = sampler.with_coefficients(reversed, s.seed());
    for z in [c(0.3, 0.4), c(-2.0, 1.0), c(5.0, -0.1)] {
        let a = s.eval_field(&[z]).unwrap().norm();
        let b = r.eval_field(&[z.inv()]).unwrap().norm();
        assert!((a - b).abs() <= 1e-12, "{z}: {a} vs {b}");
    }
}

fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn elliptic_field_modulus_is_rotation_invariant() {
    let sampler = SectionSampler::new(ModelKind::Elliptic, 20).unwrap();
    let t = 100_000u64;
    let at = |z: Complex64, sub: u64| -> Vec<f64> {
        (0..t)
            .map(|i| {
                sampler
                    .sample(SeedPath::new(30, i, sub))
                    .eval_field(&[z])
                    .unwrap()
                    .norm()
            })
            .collect()
    };
    let d = ks_two_sample(at(c(0.0, 0.0), 0), at(c(1.3, -2.2), 1));
    assert!(d < 0.02, "KS {d}");
}

#[test]
fn field_covariance_matches_rho() {
    for model in [
        ModelKind::Elliptic,
        ModelKind::Flat,
        ModelKind::Hyperbolic,
        ModelKind::ProductElliptic2,
    ] {
        let sampler = SectionSampler::new(model, 10).unwrap();
        let k = zeroscope::kernels::KernelEval::new(model, 10).unwrap();
        let z = vec![c(0.1, 0.2); model.dim()];
        let w = vec![c(0.25, 0.05); model.dim()];
        let t = 20_000u64;
        let mut acc = c(0.0, 0.0);
        for i in 0..t {
            let s = sampler.sample(SeedPath::new(50, i, 0));
            acc += s.eval_field(&z).unwrap() * s.eval_field(&w).unwrap().conj();
        }
        let emp = acc / t as f64;
        assert!(
            (emp - k.rho(&z, &w).unwrap()).norm() <= 5.0 / (t as f64).sqrt(),
            "{model}"
        );
    }
}

#[test]
fn ring_evaluator_matches_pointwise() {
    for (model, radius) in [
        (ModelKind::Elliptic, 3.0),
        (ModelKind::Hyperbolic, 0.9),
        (ModelKind::Flat, 2.5),
    ] {
        let sampler = SectionSampler::new(model, 24).unwrap();
        let s = sampler.sample(SeedPath::new(5, 0, 0));
        // fewer angles than coefficients exercises the aliasing fold
        let grid = PolarGrid::new(c(0.0, 0.0), radius, 6, 16);
        let ring = RingEvaluator::new(sampler.basis(), grid.clone()).unwrap();
        for (v, z) in ring.eval(&s).iter().zip(grid.nodes()) {
            assert!((v - s.eval_field(&[z]).unwrap()).norm() < 1e-11, "{model}");
        }
    }
    let sampler = SectionSampler::new(ModelKind::Elliptic, 4).unwrap();
    assert!(RingEvaluator::new(sampler.basis(), PolarGrid::new(c(1.0, 0.0), 1.0, 2, 8)).is_err());
}
