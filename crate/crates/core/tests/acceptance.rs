//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::f64::consts::PI;
use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use zeroscope::chaos::truncation_experiment;
use zeroscope::cli::{covariance_pairs, field_covariance, random_correlation};
use zeroscope::gaussian::SeedPath;
use zeroscope::kernels::{probe_points, KernelEval, ModelKind, Truncation};
use zeroscope::observables::{RegionSpec, TestFunction};
use zeroscope::stats::{
    run_campaign, variance_exponent_fit, variance_oracle_smooth, variance_prediction, CampaignConfig, CampaignOutcome,
    Moments, Statistic, Summary,
};
use zeroscope::wick::{enumerate_diagrams, wick_moment, wick_moment_by_isserlis};

const SEED: u64 = 1;
const MODELS: [ModelKind; 4] = [
    ModelKind::Elliptic,
    ModelKind::Flat,
    ModelKind::Hyperbolic,
    ModelKind::ProductElliptic2,
];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn campaign(model: ModelKind, degree: u32, trials: usize, statistics: Vec<Statistic>) -> CampaignOutcome {
    run_campaign(&CampaignConfig {
        model,
        degree,
        trials,
        master_seed: SEED,
        statistics,
    })
    .expect("campaign")
}

fn gauss01() -> TestFunction {
    TestFunction::gauss(Complex64::new(0.0, 0.0), 1.0)
}

fn unit_disk() -> RegionSpec {
    RegionSpec::disk(Complex64::new(0.0, 0.0), 1.0)
}

fn var(x: &[f64]) -> f64 {
    Moments::from_sample(x).unwrap().var
}

fn factorial(n: u32) -> usize {
    (1..=n as usize).product()
}

fn tuples(max_len: usize, budget: u32) -> Vec<Vec<u32>> {
    fn extend(cur: &mut Vec<u32>, left: u32, max_len: usize, out: &mut Vec<Vec<u32>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == max_len {
            return;
        }
        for a in 1..=left {
            cur.push(a);
            extend(cur, left - a, max_len, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), budget, max_len, &mut out);
    out
}

fn wick_exactness() -> Verdict {
    let mut worst = 0.0f64;
    let all = tuples(4, 4);
    for alphas in &all {
        for m in 0..20 {
            let rho = random_correlation(alphas.len(), SeedPath::new(SEED, m, alphas.len() as u64));
            let d = wick_moment(alphas, &rho).unwrap() - wick_moment_by_isserlis(alphas, &rho).unwrap();
            worst = worst.max(d.abs());
        }
    }
    verdict(
        worst <= 1e-10,
        format!(
            "{} tuples x 20 matrices, max |diff| = {worst:.2e} (<= 1e-10)",
            all.len()
        ),
    )
}

fn diagram_counts() -> Verdict {
    let mut ok = true;
    let mut counts = Vec::new();
    for a in 1..=4u32 {
        let n = enumerate_diagrams(&[a, a]).unwrap().len();
        ok &= n == factorial(a).pow(2);
        counts.push(n);
        ok &= enumerate_diagrams(&[a]).unwrap().is_empty();
        for b in (1..=4u32).filter(|&b| b != a) {
            ok &= enumerate_diagrams(&[a, b]).unwrap().is_empty();
        }
    }
    verdict(
        ok,
        format!("|G(a,a)| for a=1..4: {counts:?}; G(a) and G(a,b), a!=b, empty"),
    )
}

fn kernel_closed_forms() -> Verdict {
    let mut worst = 0.0f64;
    for model in MODELS {
        for n in [10u32, 100] {
            let k = KernelEval::new(model, n).unwrap();
            let points = probe_points(model, 20);
            // one variable: the series is a dot product of per-point weights
            let weights: Vec<Vec<Complex64>> = match model.dim() {
                1 => points.iter().map(|p| k.basis().field_weights(p[0]).unwrap()).collect(),
                _ => Vec::new(),
            };
            for (i, a) in points.iter().enumerate() {
                for (j, b) in points.iter().enumerate() {
                    let series = match model.dim() {
                        1 => weights[i].iter().zip(&weights[j]).map(|(x, y)| x * y.conj()).sum(),
                        _ => k.rho_series(a, b).unwrap(),
                    };
                    worst = worst.max((series - k.rho(a, b).unwrap()).norm());
                }
            }
        }
    }
    let mut bergman = 0.0f64;
    for n in [10u32, 100] {
        let k = KernelEval::new(ModelKind::Elliptic, n).unwrap();
        let exact = (f64::from(n) + 1.0) / PI;
        for p in probe_points(ModelKind::Elliptic, 20) {
            bergman = bergman.max((k.bergman(&p).unwrap() / exact - 1.0).abs());
        }
    }
    verdict(
        worst <= 1e-10 && bergman <= 1e-9,
        format!("series vs closed form {worst:.2e} (<= 1e-10); elliptic B_N rel dev {bergman:.2e} (<= 1e-9)"),
    )
}

fn near_diagonal_scaling() -> Verdict {
    let deficit = |model, n| KernelEval::new(model, n).unwrap().max_scaling_deficit(3.0, 13).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for model in [ModelKind::Elliptic, ModelKind::Hyperbolic] {
        let (d100, d400) = (deficit(model, 100), deficit(model, 400));
        ok &= d400 <= 0.6 * d100;
        parts.push(format!("{model} {d400:.3e}/{d100:.3e} = {:.3}", d400 / d100));
    }
    let flat = deficit(ModelKind::Flat, 100).max(deficit(ModelKind::Flat, 400));
    // exact zero up to rounding of exp
    ok &= flat <= 1e-14;
    parts.push(format!("flat {flat:.1e}"));
    verdict(ok, format!("{} (ratio <= 0.6, flat <= 1e-14)", parts.join("; ")))
}

fn field_cov() -> Verdict {
    let trials = 100_000;
    let bound = 5.0 / (trials as f64).sqrt();
    let mut worst = 0.0f64;
    for model in MODELS {
        let degree = if model.dim() == 1 { 20 } else { 5 };
        let kernel = KernelEval::new(model, degree).unwrap();
        let pairs = covariance_pairs(model, degree);
        let emp = field_covariance(model, degree, &pairs, trials, SEED).unwrap();
        for ((z, w), e) in pairs.iter().zip(&emp) {
            worst = worst.max((e - kernel.rho(z, w).unwrap()).norm());
        }
    }
    verdict(
        worst <= bound,
        format!("10 pairs x 4 models, max |emp - rho| = {worst:.2e} (<= {bound:.2e})"),
    )
}

fn equidistribution() -> Verdict {
    let out = campaign(ModelKind::Elliptic, 100, 3000, vec![Statistic::Numerical(unit_disk())]);
    let v = out.successes(0);
    let m = Moments::from_sample(&v).unwrap();
    let se = (m.var / v.len() as f64).sqrt();
    verdict(
        (m.mean - 50.0).abs() <= 3.0 * se,
        format!("mean {:.3} vs 50, se {se:.3} (<= 3 se), failed {}", m.mean, out.failed),
    )
}

/// Smooth (unit Gaussian bump) and numerical (unit disk) values, one
/// campaign shared by the variance and CLT criteria.
struct Shared256 {
    smooth: Vec<f64>,
    numerical: Vec<f64>,
}

fn shared_256() -> Shared256 {
    let out = campaign(
        ModelKind::Elliptic,
        256,
        5000,
        vec![Statistic::Smooth(gauss01()), Statistic::Numerical(unit_disk())],
    );
    assert_eq!(out.failed, 0);
    Shared256 {
        smooth: out.successes(0),
        numerical: out.successes(1),
    }
}

fn variance_constant(shared: &Shared256) -> Verdict {
    // trials are seeded individually, so the first 4000 are a T=4000 run
    let mc = var(&shared.smooth[..4000]);
    let phi = gauss01();
    let prediction = variance_prediction(ModelKind::Elliptic, 256, &phi);
    let oracle = variance_oracle_smooth(ModelKind::Elliptic, 256, &phi, Truncation::Full).unwrap();
    let ratio = mc / prediction;
    let oracle_rel = (mc / oracle - 1.0).abs();
    let loose = (ratio - 1.0).abs() <= 0.2;
    verdict(
        oracle_rel <= 0.05,
        format!(
            "N Var = {:.4e}; / prediction = {ratio:.4} ({}); vs oracle {:.2}% (<= 5%)",
            256.0 * mc,
            if loose {
                "within 20%"
            } else {
                "outside 20%, ratio reported"
            },
            100.0 * oracle_rel
        ),
    )
}

fn variance_exponents(shared: &Shared256) -> Verdict {
    let degrees = [64u32, 128, 256, 512];
    let (mut vs, mut vn) = (Vec::new(), Vec::new());
    for &n in &degrees {
        let (s, m) = if n == 256 {
            (var(&shared.smooth[..3000]), var(&shared.numerical[..3000]))
        } else {
            let out = campaign(
                ModelKind::Elliptic,
                n,
                3000,
                vec![Statistic::Smooth(gauss01()), Statistic::Numerical(unit_disk())],
            );
            (var(&out.successes(0)), var(&out.successes(1)))
        };
        vs.push(s);
        vn.push(m);
    }
    let (ss, ss_e) = variance_exponent_fit(&degrees, &vs).unwrap();
    let (sn, sn_e) = variance_exponent_fit(&degrees, &vn).unwrap();
    verdict(
        (ss + 1.0).abs() <= 0.15 && (sn - 0.5).abs() <= 0.1,
        format!("smooth slope {ss:.3} +/- {ss_e:.3} (-1 +/- 0.15); numerical {sn:.3} +/- {sn_e:.3} (0.5 +/- 0.1)"),
    )
}

fn summary(x: &[f64]) -> Summary {
    Summary::from_trials(&x.iter().copied().map(Some).collect::<Vec<_>>(), SEED)
}

fn clt_line(name: &str, x: &[f64], ks_max: f64) -> (bool, String) {
    let s = summary(x);
    let ks = s.ks.unwrap();
    let skew = s.skew.unwrap();
    let kurt = s.kurt_excess.unwrap();
    let [m3, m4, _, _] = s.standardized.unwrap();
    let ok = ks <= ks_max && skew.abs() <= 0.15 && kurt.abs() <= 0.4 && m3.abs() <= 0.15 && (m4 - 3.0).abs() <= 0.4;
    (
        ok,
        format!("{name}: KS {ks:.4}, skew {skew:.3}, kurt-3 {kurt:.3}, m3 {m3:.3}, m4 {m4:.3}"),
    )
}

fn clt(shared: &Shared256) -> Verdict {
    let (a, da) = clt_line("smooth", &shared.smooth, 0.05);
    let (b, db) = clt_line("numerical", &shared.numerical, 0.05);
    verdict(
        a && b,
        format!("{da}; {db} (KS <= 0.05, |skew| <= 0.15, |kurt-3| <= 0.4)"),
    )
}

fn product_model() -> Verdict {
    let degrees = [3u32, 4, 5, 6, 8];
    let region: RegionSpec = "pdisk:0:1:0:1".parse().unwrap();
    let (mut vn, mut vs) = (Vec::new(), Vec::new());
    let mut full_ok = true;
    let mut fractions = Vec::new();
    let mut ks = f64::NAN;
    for &n in &degrees {
        let out = campaign(
            ModelKind::ProductElliptic2,
            n,
            2000,
            vec![Statistic::Numerical(region.clone()), Statistic::Smooth(gauss01())],
        );
        let full = 1.0 - (out.failed + out.boundary_degenerate) as f64 / 2000.0;
        if n <= 6 {
            full_ok &= full >= 0.99;
            fractions.push(format!("{full:.4}"));
        }
        let counts = out.successes(0);
        if n == 6 {
            ks = summary(&counts).ks.unwrap();
        }
        vn.push(var(&counts));
        vs.push(var(&out.successes(1)));
    }
    let (sn, sn_e) = variance_exponent_fit(&degrees, &vn).unwrap();
    let (ss, ss_e) = variance_exponent_fit(&degrees, &vs).unwrap();
    let ks_ok = ks <= 0.08;
    let slopes_ok = (sn - 1.5).abs() <= 0.25 && ss.abs() <= 0.2;
    verdict(
        full_ok && ks_ok && slopes_ok,
        format!(
            "2N^2 fraction N=3..6 {fractions:?} (>= 0.99); N=6 count KS {ks:.4} (<= 0.08); numerical slope {sn:.3} +/- {sn_e:.3} \
             (1.5 +/- 0.25); smooth slope {ss:.3} +/- {ss_e:.3} (0 +/- 0.2)"
        ),
    )
}

fn chaos_truncation() -> Verdict {
    let trials = 4000;
    let rows = truncation_experiment(ModelKind::Elliptic, 128, &gauss01(), &[1, 2, 3, 5, 10], trials, SEED).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for r in &rows {
        let cross = r.cross_term.abs() <= 3.0 * r.cross_stderr;
        // Var(full) − Var(trunc) − Var(rest) is twice the sample cross term
        let gap_se = 2.0 * r.cross_stderr * trials as f64 / (trials - 1) as f64;
        let gap = r.decomposition_gap().abs() <= 3.0 * gap_se;
        ok &= cross && gap;
        parts.push(format!(
            "n={} cross/se {:.2} delta {:.4}",
            r.n,
            r.cross_term / r.cross_stderr,
            r.delta
        ));
    }
    let decreasing = rows.windows(2).all(|w| w[1].delta < w[0].delta);
    let last = rows.last().unwrap().delta;
    ok &= decreasing && last <= 0.05;
    verdict(
        ok,
        format!(
            "{}; decreasing {decreasing}, delta_10 {last:.4} (<= 0.05)",
            parts.join("; ")
        ),
    )
}

fn determinism() -> Verdict {
    let runs = [
        "clt --model elliptic -N 64 --trials 300 --stat smooth --phi gauss:0.3,0.1:0.8",
        "variance --model hyperbolic --degrees 8,12,16,24 --trials 200 --stat numerical --region disk:0:0.5",
        "intersect -N 3 --trials 150 --region pdisk:0:1:0:1",
    ];
    let mut ok = true;
    for line in runs {
        let bytes = |k: u32| {
            let mut args: Vec<String> = line.split_whitespace().map(String::from).collect();
            args.extend(["--seed".into(), "11".into(), "--threads".into(), k.to_string()]);
            let o = Command::new(env!("CARGO_BIN_EXE_zeroscope"))
                .args(&args)
                .output()
                .unwrap();
            (o.status.code(), o.stdout)
        };
        let first = bytes(1);
        ok &= first.0 == Some(0) && !first.1.is_empty();
        for k in [1, 4, 16] {
            ok &= bytes(k) == first;
        }
    }
    verdict(
        ok,
        "clt, variance and intersect reruns byte-identical for threads 1, 4, 16".into(),
    )
}

fn report(id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = f();
    let took = start.elapsed();
    let pass = v.pass && took <= limit;
    let line = format!(
        "{} [{id:>2}] {name}: {} [{:.1}s, limit {}s]\n",
        if pass { "PASS" } else { "FAIL" },
        v.detail,
        took.as_secs_f64(),
        limit.as_secs()
    );
    // bypasses the harness capture so the table always shows
    let _ = std::io::stderr().write_all(line.as_bytes());
    pass
}

#[test]
fn acceptance_criteria() {
    let min = |m: u64| Duration::from_secs(60 * m);
    // start the table on its own line, after the harness's test name
    let _ = std::io::stderr().write_all(b"\n");
    let mut results = vec![
        report(1, "Wick formula exactness", min(1), wick_exactness),
        report(2, "diagram counts", min(1), diagram_counts),
        report(3, "kernel closed forms", min(1), kernel_closed_forms),
        report(4, "near-diagonal scaling", min(1), near_diagonal_scaling),
        report(5, "field covariance", min(2), field_cov),
        report(6, "equidistribution mean", min(5), equidistribution),
    ];
    let start = Instant::now();
    let shared = shared_256();
    // the shared campaign counts against both criteria that use it
    let shared_cost = start.elapsed();
    let budget = |m: u64| min(m).saturating_sub(shared_cost);
    results.push(report(7, "variance constant", budget(20), || {
        variance_constant(&shared)
    }));
    results.push(report(8, "variance exponents", budget(40), || {
        variance_exponents(&shared)
    }));
    results.push(report(9, "CLT", budget(20), || clt(&shared)));
    results.push(report(10, "product model", min(60), product_model));
    results.push(report(11, "chaos truncation", min(30), chaos_truncation));
    results.push(report(12, "determinism", min(10), determinism));
    let passed = results.iter().filter(|p| **p).count();
    let _ = std::io::stderr().write_all(format!("acceptance: {passed}/{} criteria pass\n", results.len()).as_bytes());
    assert_eq!(
        passed,
        results.len(),
        "some acceptance criteria fail; see the table above"
    );
}
