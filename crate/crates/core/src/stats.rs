//! Per-trial statistics, Monte Carlo campaigns, summary statistics and the
//! quadrature variance oracle.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaussian::{GaussianStream, SeedPath};
use crate::kernels::{q_from_p, KernelError, KernelEval, ModelKind, Truncation};
use crate::observables::{count_in_region, RegionSpec, SpecError, TestFunction};
use crate::quadrature::PolarGrid;
use crate::sampler::{SectionSample, SectionSampler};
use crate::solver::{common_zeros_bivariate, roots_univariate_scaled, BivariatePoly, SolverError, ZeroSet};
use crate::special::EULER_GAMMA;

/// Residual above which a zero set is rejected.
pub const RESIDUAL_LIMIT: f64 = 1e-8;
/// Largest tolerated fraction of failed trials.
pub const FAILURE_RATE_LIMIT: f64 = 0.01;
pub const MIN_TRIALS: usize = 100;
/// Fewest degrees accepted by [`variance_exponent_fit`].
pub const MIN_FIT_DEGREES: usize = 4;
/// Domain tag for the lattice jitter stream.
const JITTER_SUBSTREAM: u64 = 0x6a17;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("campaigns need at least {MIN_TRIALS} trials, got {0}")]
    TooFewTrials(usize),
    #[error("{failed} of {trials} trials failed")]
    SolverFailureRate { failed: usize, trials: usize },
    #[error("non-positive variance at index {0}")]
    NonPositiveVariance(usize),
    #[error("need at least {need} points for the fit, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("quadrature did not converge (last relative change {0:e})")]
    QuadratureNotConverged(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// `Σ φ(p)` over the zero set.
pub fn smooth_statistic(zs: &ZeroSet, phi: &TestFunction) -> f64 {
    zs.points().map(|p| phi.value_at(p)).sum()
}

/// Number of zeros in the region.
pub fn numerical_statistic(zs: &ZeroSet, region: &RegionSpec) -> usize {
    count_in_region(zs, region)
}

/// Sample moments by the two-pass scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    /// Unbiased variance.
    pub var: f64,
    /// Central moments of orders 3..=6 (divided by `n`).
    pub central: [f64; 4],
    /// Moments of orders 3..=6 of the sample standardized by its mean and
    /// unbiased standard deviation.
    pub standardized: [f64; 4],
    pub skew: f64,
    pub kurt_excess: f64,
}

impl Moments {
    /// `None` for fewer than two values.
    pub fn from_sample(x: &[f64]) -> Option<Self> {
        let n = x.len();
        if n < 2 {
            return None;
        }
        let nf = n as f64;
        let mean = x.iter().sum::<f64>() / nf;
        let mut c = [0.0f64; 7];
        for v in x {
            let d = v - mean;
            let mut p = d * d;
            for item in c.iter_mut().skip(2) {
                *item += p;
                p *= d;
            }
        }
        for item in c.iter_mut() {
            *item /= nf;
        }
        let var = c[2] * nf / (nf - 1.0);
        let sd = var.sqrt();
        let standardized = [3, 4, 5, 6].map(|p| c[p] / sd.powi(p as i32));
        Some(Self {
            n,
            mean,
            var,
            central: [c[3], c[4], c[5], c[6]],
            standardized,
            skew: c[3] / c[2].powf(1.5),
            kurt_excess: c[4] / (c[2] * c[2]) - 3.0,
        })
    }
}

/// Kolmogorov–Smirnov distance between the sample standardized by its own
/// mean and standard deviation and `N(0, 1)`.
pub fn ks_normal(x: &[f64]) -> Option<f64> {
    let m = Moments::from_sample(x)?;
    let sd = m.var.sqrt();
    if !(sd > 0.0) {
        return None;
    }
    let mut z: Vec<f64> = x.iter().map(|v| (v - m.mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in z.iter().enumerate() {
        let f = crate::special::normal_cdf(*v);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Some(d)
}

pub fn is_lattice(x: &[f64]) -> bool {
    !x.is_empty() && x.iter().all(|v| v.fract() == 0.0)
}

/// KS distance with a continuity correction for integer-valued samples:
/// each value is spread by an independent `U(−½, ½)` from a seeded stream.
/// Non-lattice samples are tested as they are.
pub fn ks_normal_continuity(x: &[f64], seed: u64) -> Option<f64> {
    if !is_lattice(x) {
        return ks_normal(x);
    }
    let mut stream = GaussianStream::new(SeedPath::new(seed, 0, JITTER_SUBSTREAM));
    let spread: Vec<f64> = x.iter().map(|v| v + stream.next_uniform() - 0.5).collect();
    ks_normal(&spread)
}

/// Ordinary least squares slope and its standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let stderr = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some((slope, stderr))
}

/// Slope of `log Var` against `log N`.
pub fn variance_exponent_fit(degrees: &[u32], variances: &[f64]) -> Result<(f64, f64), StatsError> {
    if degrees.len() < MIN_FIT_DEGREES || degrees.len() != variances.len() {
        return Err(StatsError::TooFewPoints {
            need: MIN_FIT_DEGREES,
            got: degrees.len().min(variances.len()),
        });
    }
    if let Some(i) = variances.iter().position(|v| !(*v > 0.0)) {
        return Err(StatsError::NonPositiveVariance(i));
    }
    let x: Vec<f64> = degrees.iter().map(|&d| f64::from(d).ln()).collect();
    let y: Vec<f64> = variances.iter().map(|v| v.ln()).collect();
    ols_slope(&x, &y).ok_or(StatsError::TooFewPoints {
        need: MIN_FIT_DEGREES,
        got: 1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Statistic {
    Smooth(TestFunction),
    Numerical(RegionSpec),
    /// Total number of finite zeros.
    Count,
}

impl Statistic {
    pub fn label(&self) -> String {
        match self {
            Statistic::Smooth(phi) => format!("smooth {phi}"),
            Statistic::Numerical(r) => format!("numerical {r}"),
            Statistic::Count => "count".into(),
        }
    }

    pub fn evaluate(&self, zs: &ZeroSet) -> f64 {
        match self {
            Statistic::Smooth(phi) => smooth_statistic(zs, phi),
            Statistic::Numerical(r) => numerical_statistic(zs, r) as f64,
            Statistic::Count => zs.len() as f64,
        }
    }

    /// Exact mean `E[X]` from the expected zero density.
    pub fn expected_mean(&self, model: ModelKind, degree: u32) -> f64 {
        match self {
            Statistic::Numerical(r) => r.expected_count(model, degree),
            Statistic::Count => {
                let n = f64::from(degree);
                if model == ModelKind::ProductElliptic2 {
                    2.0 * n * n
                } else {
                    n
                }
            }
            Statistic::Smooth(phi) => {
                let one = deterministic_term(model.factor(), degree, phi);
                if model == ModelKind::ProductElliptic2 {
                    // 2N² ω₁∧ω₂/π² against φ₁ ⊗ φ₂
                    2.0 * one * one
                } else {
                    one
                }
            }
        }
    }
}

/// `D_N(φ) = (N/π) ∫ φ ρ_ω dA`, the mean of the smooth statistic of one
/// section in one variable.
pub fn deterministic_term(model: ModelKind, degree: u32, phi: &TestFunction) -> f64 {
    let density = |z: Complex64| match model {
        ModelKind::Flat => 1.0,
        ModelKind::Hyperbolic => (1.0 - z.norm_sqr()).powi(-2),
        _ => (1.0 + z.norm_sqr()).powi(-2),
    };
    let mut reach = phi.support_radius();
    if model == ModelKind::Hyperbolic {
        reach = reach.min(1.0 - phi.center().norm() - 1e-9);
    }
    let grid = PolarGrid::new(phi.center(), reach, 400, 256);
    f64::from(degree) / PI * grid.integrate(|z| phi.value(z) * density(z))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub model: ModelKind,
    pub degree: u32,
    pub trials: usize,
    pub master_seed: u64,
    pub statistics: Vec<Statistic>,
}

/// Raw campaign output, in trial order.
#[derive(Clone, Debug, PartialEq)]
pub struct CampaignOutcome {
    pub config: CampaignConfig,
    /// `values[s][t]`: statistic `s` of trial `t`, `None` for failed trials.
    pub values: Vec<Vec<Option<f64>>>,
    pub failed: usize,
    /// Trials whose zero set touched chart infinity.
    pub boundary_degenerate: usize,
}

impl CampaignOutcome {
    /// Successful values of statistic `s`.
    pub fn successes(&self, s: usize) -> Vec<f64> {
        self.values[s].iter().flatten().copied().collect()
    }
}

/// The zero set of trial `trial`, seeds `(master, trial, 0)` and, for the
/// product model, `(master, trial, 1)` for the second section.
pub fn trial_zero_set(sampler: &SectionSampler, master: u64, trial: u64) -> Result<ZeroSet, SolverError> {
    let first = sampler.sample(SeedPath::new(master, trial, 0));
    match sampler.model() {
        ModelKind::ProductElliptic2 => {
            let second = sampler.sample(SeedPath::new(master, trial, 1));
            common_zeros_of_sections(&first, &second)
        }
        _ => zeros_of_section(&first),
    }
}

pub fn zeros_of_section(s: &SectionSample) -> Result<ZeroSet, SolverError> {
    roots_univariate_scaled(s.coeffs(), s.basis().log_norm())
}

pub fn common_zeros_of_sections(a: &SectionSample, b: &SectionSample) -> Result<ZeroSet, SolverError> {
    common_zeros_bivariate(
        &BivariatePoly::new(a.bivariate_polynomial()),
        &BivariatePoly::new(b.bivariate_polynomial()),
    )
}

enum TrialStatus {
    Ok(ZeroSet),
    Boundary,
    Failed,
}

fn classify(result: Result<ZeroSet, SolverError>) -> TrialStatus {
    match result {
        Ok(zs) if zs.residual <= RESIDUAL_LIMIT && zs.len() + zs.at_infinity == zs.degree_expected => {
            if zs.at_infinity > 0 {
                TrialStatus::Boundary
            } else {
                TrialStatus::Ok(zs)
            }
        }
        _ => TrialStatus::Failed,
    }
}

/// Run every trial (in parallel, reduced in trial order) and evaluate all
/// configured statistics on each zero set.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignOutcome, StatsError> {
    if config.trials < MIN_TRIALS {
        return Err(StatsError::TooFewTrials(config.trials));
    }
    for st in &config.statistics {
        match st {
            Statistic::Smooth(phi) => phi.validate()?,
            Statistic::Numerical(r) => r.validate(config.model)?,
            Statistic::Count => {}
        }
    }
    let sampler = SectionSampler::new(config.model, config.degree)?;
    let statuses: Vec<TrialStatus> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| classify(trial_zero_set(&sampler, config.master_seed, t)))
        .collect();
    let failed = statuses.iter().filter(|s| matches!(s, TrialStatus::Failed)).count();
    let boundary_degenerate = statuses.iter().filter(|s| matches!(s, TrialStatus::Boundary)).count();
    if failed as f64 > FAILURE_RATE_LIMIT * config.trials as f64 {
        return Err(StatsError::SolverFailureRate {
            failed,
            trials: config.trials,
        });
    }
    let values = config
        .statistics
        .iter()
        .map(|st| {
            statuses
                .iter()
                .map(|s| match s {
                    TrialStatus::Ok(zs) => Some(st.evaluate(zs)),
                    _ => None,
                })
                .collect()
        })
        .collect();
    Ok(CampaignOutcome {
        config: config.clone(),
        values,
        failed,
        boundary_degenerate,
    })
}

/// Summary block of a report. Every field derived from the data is `None`
/// when there are too few successful trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub failed: usize,
    pub mean: Option<f64>,
    pub var: Option<f64>,
    /// Central moments of orders 3..=6.
    pub moments: Option<[f64; 4]>,
    /// Standardized moments of orders 3..=6.
    pub standardized: Option<[f64; 4]>,
    /// KS distance to `N(0,1)` (continuity-corrected for lattice data).
    pub ks: Option<f64>,
    /// Same value as `ks`, under the name used by CLT reports.
    pub ks_distance: Option<f64>,
    /// KS distance of the raw standardized sample.
    pub ks_raw: Option<f64>,
    pub skew: Option<f64>,
    pub kurt_excess: Option<f64>,
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
}

impl Summary {
    pub fn from_trials(per_trial: &[Option<f64>], seed: u64) -> Self {
        let ok: Vec<f64> = per_trial.iter().flatten().copied().collect();
        let m = Moments::from_sample(&ok);
        let ks = ks_normal_continuity(&ok, seed);
        Self {
            trials: per_trial.len(),
            failed: per_trial.len() - ok.len(),
            mean: m.as_ref().map(|m| m.mean).or_else(|| ok.first().copied()),
            var: m.as_ref().map(|m| m.var),
            moments: m.as_ref().map(|m| m.central),
            standardized: m.as_ref().map(|m| m.standardized),
            ks,
            ks_distance: ks,
            ks_raw: ks_normal(&ok),
            skew: m.as_ref().map(|m| m.skew),
            kurt_excess: m.as_ref().map(|m| m.kurt_excess),
            slope: None,
            slope_stderr: None,
        }
    }
}

/// Per-degree block of a multi-degree report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeSection {
    pub degree: u32,
    pub expected_mean: Option<f64>,
    /// Quadrature variance oracle (smooth statistics, one variable).
    pub oracle: Option<f64>,
    /// Second-order prediction `ζ(3)/(4π) ‖∂∂̄φ‖² / N`.
    pub prediction: Option<f64>,
    pub summary: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub master_seed: u64,
    /// Human-readable derivation rule of per-trial seeds.
    pub scheme: String,
}

impl SeedInfo {
    pub fn campaign(master_seed: u64) -> Self {
        Self {
            master_seed,
            scheme: "trial t uses (master, t, 0); second product section (master, t, 1)".into(),
        }
    }
}

/// Monte Carlo summary with its configuration echo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: BTreeMap<String, serde_json::Value>,
    pub per_trial: Vec<Option<f64>>,
    pub summary: Summary,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sections: Vec<DegreeSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<serde_json::Value>,
    pub seeds: SeedInfo,
    pub version: String,
}

impl ExperimentReport {
    pub fn new(config: BTreeMap<String, serde_json::Value>, per_trial: Vec<Option<f64>>, master_seed: u64) -> Self {
        let summary = Summary::from_trials(&per_trial, master_seed);
        Self {
            config,
            per_trial,
            summary,
            sections: Vec::new(),
            table: Vec::new(),
            seeds: SeedInfo::campaign(master_seed),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Variance of the smooth statistic of `φ` from its two-point function,
/// with `μ = (2/π) φ_{zz̄}`.
pub fn variance_oracle_smooth(
    model: ModelKind,
    degree: u32,
    phi: &TestFunction,
    n: Truncation,
) -> Result<f64, StatsError> {
    let center = phi.center();
    let radial = model == ModelKind::Flat || center == Complex64::new(0.0, 0.0);
    let region = OracleRegion {
        center,
        reach: phi.support_radius(),
        radial,
    };
    variance_oracle_density(model, degree, &region, |z| phi.mu(z), n)
}

/// Support of the density handed to [`variance_oracle_density`]: a disk of
/// radius `reach` about `center`. `radial` means the whole integrand is
/// invariant under rotation about `center`, so one outer angle suffices.
#[derive(Clone, Copy, Debug)]
pub struct OracleRegion {
    pub center: Complex64,
    pub reach: f64,
    pub radial: bool,
}

/// `∬ C_n(z, w) μ(z) μ(w) dA dA` with `C_n = ¼ Σ_{α ≤ n} P^{2α}/α²`.
///
/// The outer integral runs over a polar grid around the region centre; the
/// inner one over a polar grid around `z` whose radius is where `P²` drops
/// below `1e-16`. Both are refined together until the relative change is
/// below `1e-3`.
pub fn variance_oracle_density(
    model: ModelKind,
    degree: u32,
    region: &OracleRegion,
    mu: impl Fn(Complex64) -> f64,
    n: Truncation,
) -> Result<f64, StatsError> {
    if model.dim() != 1 {
        return Err(StatsError::Unsupported(
            "variance oracle needs a one-variable model".into(),
        ));
    }
    let kernel = KernelEval::new(model, degree)?;
    let c0 = EULER_GAMMA * EULER_GAMMA / (4.0 * PI * PI);
    // C_n = π² (Q^{[n]} − γ²/4π²)
    let cov = |p: f64| PI * PI * (q_from_p(p, n) - c0);
    let center = region.center;
    let mut reach = region.reach;
    if model == ModelKind::Hyperbolic {
        reach = reach.min(1.0 - center.norm() - 1e-9);
    }
    let in_chart = |w: Complex64| model != ModelKind::Hyperbolic || w.norm() < 1.0;
    let p_of = |z: Complex64, w: Complex64| kernel.p_mod(&[z], &[w]).unwrap_or(0.0);
    // the inner disk only needs to reach the support of μ
    let inner_radius = |z: Complex64| -> f64 {
        let cap = (z - center).norm() + reach;
        let mut worst: f64 = 0.0;
        for k in 0..8 {
            let dir = Complex64::from_polar(1.0, PI * k as f64 / 4.0);
            let (mut lo, mut hi) = (0.0, 1.0);
            while in_chart(z + dir * hi) && p_of(z, z + dir * hi) > 1e-8 && hi < cap {
                hi *= 2.0;
            }
            if hi >= cap {
                return cap;
            }
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if in_chart(z + dir * mid) && p_of(z, z + dir * mid) > 1e-8 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            worst = worst.max(hi);
        }
        (1.1 * worst).min(cap)
    };
    let evaluate = |level: u32| -> f64 {
        let s = 1usize << level;
        let outer = PolarGrid::new(center, reach, 16 * s, if region.radial { 1 } else { 16 * s });
        let mut total = 0.0;
        for i in 0..outer.radii().len() {
            let angles = outer.angles();
            let mut ring = 0.0;
            for k in 0..angles {
                let z = outer.node(i, k);
                let mz = mu(z);
                if mz == 0.0 || !in_chart(z) {
                    continue;
                }
                let inner = PolarGrid::new(z, inner_radius(z), 12 * s, 12 * s);
                let val = inner.integrate(|w| if in_chart(w) { cov(p_of(z, w)) * mu(w) } else { 0.0 });
                ring += mz * val;
            }
            total += ring * outer.ring_weight(i);
        }
        total
    };
    let mut prev = evaluate(0);
    let mut change = f64::INFINITY;
    for level in 1..=4 {
        let next = evaluate(level);
        change = (next - prev).abs() / next.abs().max(f64::MIN_POSITIVE);
        if change < 1e-3 || next == 0.0 {
            return Ok(next);
        }
        prev = next;
    }
    Err(StatsError::QuadratureNotConverged(change))
}

/// Second-order prediction `ζ(3)/(4π) ‖∂∂̄φ‖² / N` for one-variable models,
/// with `‖∂∂̄φ‖² = ∫ f² ω` where `∂∂̄φ = f ω`.
pub fn variance_prediction(model: ModelKind, degree: u32, phi: &TestFunction) -> f64 {
    let density = |z: Complex64| match model {
        ModelKind::Flat => 1.0,
        ModelKind::Hyperbolic => (1.0 - z.norm_sqr()).powi(-2),
        _ => (1.0 + z.norm_sqr()).powi(-2),
    };
    let mut reach = phi.support_radius();
    if model == ModelKind::Hyperbolic {
        reach = reach.min(1.0 - phi.center().norm() - 1e-9);
    }
    let grid = PolarGrid::new(phi.center(), reach, 400, 256);
    let norm2 = 4.0 * grid.integrate(|z| phi.laplacian(z).powi(2) / density(z));
    crate::special::ZETA_3 / (4.0 * PI) * norm2 / f64::from(degree)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_small_samples() {
        let m = Moments::from_sample(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.var, 1.0);
        assert!(Moments::from_sample(&[1.0]).is_none());
    }

    #[test]
    fn ols_recovers_power_law() {
        let degrees = [64u32, 128, 256, 512];
        let vars: Vec<f64> = degrees.iter().map(|&d| 3.7 * f64::from(d).powf(-1.25)).collect();
        let (s, e) = variance_exponent_fit(&degrees, &vars).unwrap();
        assert!((s + 1.25).abs() < 1e-12 && e < 1e-10);
        assert_eq!(
            variance_exponent_fit(&degrees, &[1.0, 0.0, 1.0, 1.0]),
            Err(StatsError::NonPositiveVariance(1))
        );
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 2000;
        let x: Vec<f64> = (0..n)
            .map(|i| statrs::function::erf::erf_inv(2.0 * (i as f64 + 0.5) / n as f64 - 1.0) * std::f64::consts::SQRT_2)
            .collect();
        assert!(ks_normal(&x).unwrap() < 0.01);
    }

    #[test]
    fn prediction_for_centred_gaussian_bump() {
        // ∫(1+r²)² φ_{zz̄}² dA = 3π/4 for φ = e^{-|z|²}
        let v = variance_prediction(
            ModelKind::Elliptic,
            1,
            &TestFunction::gauss(Complex64::new(0.0, 0.0), 1.0),
        );
        assert!((v - crate::special::ZETA_3 * 0.75).abs() < 1e-9);
    }

    #[test]
    fn oracle_vanishes_for_zero_laplacian_mass() {
        let phi = TestFunction::gauss(Complex64::new(0.0, 0.0), 1.0);
        let v = variance_oracle_smooth(ModelKind::Elliptic, 64, &phi, Truncation::Order(0)).unwrap();
        assert_eq!(v, 0.0);
    }
}
