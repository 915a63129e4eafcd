//! Chaos truncation of `log|ξ|` and the truncated smooth statistics.
//!
//! On `x = |ξ|²` the chaos series of `log|ξ|` is the Laguerre expansion
//! `½ log x = −γ/2 − Σ_{α≥1} L_α(x)/(2α)`, because `:x:_α = (−1)^α α! L_α(x)`.
//! Bulk evaluation runs the three-term Laguerre recurrence; the exact
//! integer Wick coefficients lose everything to cancellation once `α` is
//! in the teens.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gaussian::SeedPath;
use crate::kernels::{ModelKind, Truncation};
use crate::observables::TestFunction;
use crate::quadrature::PolarGrid;
use crate::sampler::{RingEvaluator, SectionSample, SectionSampler};
use crate::special::EULER_GAMMA;
use crate::stats::{deterministic_term, StatsError, MIN_TRIALS};
use crate::wick::{chaos_coefficient, wick_polynomial, WickError, WickPolynomial, WICK_MAX_ORDER};

/// Quadrature nodes this close to a zero of `ξ` are nudged off it.
const NODE_ZERO_GUARD: f64 = 1e-8;

/// `c_0 + Σ_{α=1}^{n} (c_{2α}/α!) :x:_α`.
pub fn truncated_log(x: f64, n: u32) -> Result<f64, WickError> {
    if n > WICK_MAX_ORDER {
        return Err(WickError::Overflow(n));
    }
    let mut sums = [0.0];
    laguerre_partial_sums(x, &[n], &mut sums);
    Ok(sums[0])
}

/// Partial sums of the chaos series at every order in `orders` (ascending).
fn laguerre_partial_sums(x: f64, orders: &[u32], out: &mut [f64]) {
    let mut acc = -0.5 * EULER_GAMMA;
    let (mut prev, mut cur) = (1.0, 1.0 - x);
    let mut next_order = 0;
    let top = orders.last().copied().unwrap_or(0);
    for alpha in 0..=top {
        if alpha >= 1 {
            if alpha >= 2 {
                let a = f64::from(alpha);
                let l = ((2.0 * a - 1.0 - x) * cur - (a - 1.0) * prev) / a;
                prev = cur;
                cur = l;
            }
            acc -= cur / (2.0 * f64::from(alpha));
        }
        while next_order < orders.len() && orders[next_order] == alpha {
            out[next_order] = acc;
            next_order += 1;
        }
    }
}

/// Truncated chaos sum of `log|ξ|` with its Wick table.
#[derive(Clone, Debug)]
pub struct TruncatedLogEvaluator {
    order: u32,
    polynomials: Vec<WickPolynomial>,
    weights: Vec<f64>,
}

impl TruncatedLogEvaluator {
    pub fn new(order: u32) -> Result<Self, WickError> {
        if order > WICK_MAX_ORDER {
            return Err(WickError::Overflow(order));
        }
        let polynomials = (1..=order).map(wick_polynomial).collect::<Result<Vec<_>, _>>()?;
        let weights = (1..=order)
            .map(|a| chaos_coefficient(a) / crate::special::ln_factorial(u64::from(a)).exp())
            .collect();
        Ok(Self {
            order,
            polynomials,
            weights,
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn wick(&self) -> &[WickPolynomial] {
        &self.polynomials
    }

    /// `c_{2α}/α!` for `α = 1..=n`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut s = [0.0];
        laguerre_partial_sums(x, &[self.order], &mut s);
        s[0]
    }

    /// Direct sum over the exact Wick polynomials; accurate for small `n`.
    pub fn eval_by_wick(&self, x: f64) -> f64 {
        chaos_coefficient(0)
            + self
                .polynomials
                .iter()
                .zip(&self.weights)
                .map(|(p, w)| w * p.eval(x))
                .sum::<f64>()
    }
}

/// Quadrature of `∫ log|ξ| μ dA` on a polar grid centred at the chart
/// origin, with `μ = (2/π) φ_{zz̄}`.
pub struct ChaosQuadrature {
    model: ModelKind,
    degree: u32,
    evaluator: RingEvaluator,
    /// `μ dA` per node, ring-major.
    weights: Vec<f64>,
    deterministic: f64,
}

impl ChaosQuadrature {
    /// Grid with `2N` (at least 64) radial nodes and the next power of two
    /// above `2N` angles, covering the support of `φ`.
    pub fn new(model: ModelKind, degree: u32, phi: &TestFunction) -> Result<Self, StatsError> {
        let radial = (2 * degree as usize).max(64);
        let angles = (2 * degree as usize + 2).max(64).next_power_of_two();
        Self::with_resolution(model, degree, phi, radial, angles)
    }

    pub fn with_resolution(
        model: ModelKind,
        degree: u32,
        phi: &TestFunction,
        radial: usize,
        angles: usize,
    ) -> Result<Self, StatsError> {
        if model.dim() != 1 {
            return Err(StatsError::Unsupported(
                "chaos quadrature needs a one-variable model".into(),
            ));
        }
        phi.validate()?;
        let mut reach = phi.center().norm() + phi.support_radius();
        if model == ModelKind::Hyperbolic {
            reach = reach.min(1.0 - 1e-9);
        }
        let grid = PolarGrid::new(Complex64::new(0.0, 0.0), reach, radial, angles);
        let sampler = SectionSampler::new(model, degree)?;
        let mut weights = Vec::with_capacity(grid.len());
        for i in 0..grid.radii().len() {
            for k in 0..angles {
                weights.push(phi.mu(grid.node(i, k)) * grid.ring_weight(i));
            }
        }
        // ∫ μ = 0 and ∫ μ|z|² = (2/π)∫ φ are exact; check the grid resolves both
        let nodes = grid.nodes();
        let abs: f64 = weights.iter().map(|w| w.abs()).sum();
        let total: f64 = weights.iter().sum();
        let second: f64 = weights
            .iter()
            .zip(&nodes)
            .map(|(w, z)| w * (z - phi.center()).norm_sqr())
            .sum();
        let mass = 2.0 / std::f64::consts::PI * grid.integrate(|z| phi.value(z));
        let err = (total.abs() / abs).max((second - mass).abs() / mass.abs());
        if !(err < 1e-3) {
            return Err(StatsError::QuadratureNotConverged(err));
        }
        let evaluator = RingEvaluator::new(sampler.basis(), grid)?;
        Ok(Self {
            model,
            degree,
            evaluator,
            weights,
            deterministic: deterministic_term(model, degree, phi),
        })
    }

    /// Quadrature against an arbitrary density `μ` on the disk of radius
    /// `reach` about 0, with a caller-supplied mean. No resolution check.
    pub fn with_density(
        model: ModelKind,
        degree: u32,
        reach: f64,
        (radial, angles): (usize, usize),
        mu: impl Fn(Complex64) -> f64,
        deterministic: f64,
    ) -> Result<Self, StatsError> {
        if model.dim() != 1 {
            return Err(StatsError::Unsupported(
                "chaos quadrature needs a one-variable model".into(),
            ));
        }
        let grid = PolarGrid::new(Complex64::new(0.0, 0.0), reach, radial, angles);
        let sampler = SectionSampler::new(model, degree)?;
        let mut weights = Vec::with_capacity(grid.len());
        for i in 0..grid.radii().len() {
            for k in 0..angles {
                weights.push(mu(grid.node(i, k)) * grid.ring_weight(i));
            }
        }
        Ok(Self {
            model,
            degree,
            evaluator: RingEvaluator::new(sampler.basis(), grid)?,
            weights,
            deterministic,
        })
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn grid(&self) -> &PolarGrid {
        self.evaluator.grid()
    }

    /// `D_N(φ)`, the mean of the statistic.
    pub fn deterministic(&self) -> f64 {
        self.deterministic
    }

    /// `|ξ|²` at every node; nodes on a zero are moved half an angular step.
    pub fn field_intensity(&self, sample: &SectionSample) -> Vec<f64> {
        let values = self.evaluator.eval(sample);
        let grid = self.grid();
        let m = grid.angles();
        let step = std::f64::consts::PI / m as f64;
        values
            .iter()
            .enumerate()
            .map(|(idx, v)| {
                let x = v.norm_sqr();
                if x.sqrt() >= NODE_ZERO_GUARD {
                    return x;
                }
                let node = grid.node(idx / m, idx % m);
                let moved = node * Complex64::from_polar(1.0, step);
                sample.eval_field(&[moved]).map(|f| f.norm_sqr()).unwrap_or(x)
            })
            .collect()
    }

    /// Truncated statistics `X^{[n]}` for each entry of `orders`.
    pub fn statistics(&self, sample: &SectionSample, orders: &[Truncation]) -> Vec<f64> {
        let x = self.field_intensity(sample);
        self.statistics_from_intensity(&x, orders)
    }

    pub fn statistics_from_intensity(&self, x: &[f64], orders: &[Truncation]) -> Vec<f64> {
        let mut finite: Vec<u32> = orders
            .iter()
            .filter_map(|t| match t {
                Truncation::Order(n) => Some(*n),
                Truncation::Full => None,
            })
            .collect();
        finite.sort_unstable();
        finite.dedup();
        let want_full = orders.contains(&Truncation::Full);
        let mut acc = vec![0.0; finite.len()];
        let mut full = 0.0;
        let mut partial = vec![0.0; finite.len()];
        for (xi, w) in x.iter().zip(&self.weights) {
            if *w == 0.0 {
                continue;
            }
            laguerre_partial_sums(*xi, &finite, &mut partial);
            for (a, p) in acc.iter_mut().zip(&partial) {
                *a += w * p;
            }
            if want_full {
                full += w * 0.5 * xi.ln();
            }
        }
        orders
            .iter()
            .map(|t| {
                self.deterministic
                    + match t {
                        Truncation::Full => full,
                        Truncation::Order(n) => acc[finite.binary_search(n).unwrap()],
                    }
            })
            .collect()
    }
}

/// `X^{[n]}` for one sample.
pub fn truncated_statistic(
    sample: &SectionSample,
    quadrature: &ChaosQuadrature,
    n: Truncation,
) -> Result<f64, StatsError> {
    if sample.model() != quadrature.model() || sample.degree() != quadrature.degree() {
        return Err(StatsError::Unsupported(
            "sample and quadrature disagree on the model".into(),
        ));
    }
    Ok(quadrature.statistics(sample, &[n])[0])
}

/// One row of the truncation table. Statistics are centred by their sample
/// means; `X` is the untruncated quadrature statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub n: u32,
    pub var_truncated: f64,
    pub var_remainder: f64,
    pub var_full: f64,
    /// `E[X̂^{[n]} (X̂ − X̂^{[n]})]` and its standard error.
    pub cross_term: f64,
    pub cross_stderr: f64,
    /// `E[(X̂^{[n]}/σ_n − X̂/σ)²]`.
    pub delta: f64,
    /// Sample mean of `X^{[n]} − X`, the drift left by truncation.
    pub mean_drift: f64,
}

impl TruncationRow {
    /// `Var(X̂) − Var(X̂^{[n]}) − Var(X̂ − X̂^{[n]})`, which equals twice the
    /// cross term.
    pub fn decomposition_gap(&self) -> f64 {
        self.var_full - self.var_truncated - self.var_remainder
    }
}

/// Per-trial statistics `[X^{[n_1]}, …, X^{[n_r]}, X]` for trials seeded
/// `(master, t, 0)`.
pub fn truncated_samples(
    quadrature: &ChaosQuadrature,
    orders: &[u32],
    trials: usize,
    master_seed: u64,
) -> Result<Vec<Vec<f64>>, StatsError> {
    let sampler = SectionSampler::new(quadrature.model(), quadrature.degree())?;
    let mut truncations: Vec<Truncation> = orders.iter().map(|&n| Truncation::Order(n)).collect();
    truncations.push(Truncation::Full);
    Ok((0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = sampler.sample(SeedPath::new(master_seed, t, 0));
            quadrature.statistics(&s, &truncations)
        })
        .collect())
}

pub fn truncation_experiment(
    model: ModelKind,
    degree: u32,
    phi: &TestFunction,
    orders: &[u32],
    trials: usize,
    master_seed: u64,
) -> Result<Vec<TruncationRow>, StatsError> {
    if trials < MIN_TRIALS {
        return Err(StatsError::TooFewTrials(trials));
    }
    if let Some(&n) = orders.iter().find(|&&n| n > WICK_MAX_ORDER) {
        return Err(StatsError::Unsupported(format!(
            "truncation order {n} exceeds {WICK_MAX_ORDER}"
        )));
    }
    let quadrature = ChaosQuadrature::new(model, degree, phi)?;
    let samples = truncated_samples(&quadrature, orders, trials, master_seed)?;
    Ok(truncation_table(orders, &samples))
}

/// Rows from per-trial vectors laid out as in [`truncated_samples`].
pub fn truncation_table(orders: &[u32], samples: &[Vec<f64>]) -> Vec<TruncationRow> {
    let t = samples.len() as f64;
    let full_idx = orders.len();
    let column = |k: usize| -> Vec<f64> { samples.iter().map(|s| s[k]).collect() };
    let centre = |v: Vec<f64>| -> (Vec<f64>, f64) {
        let m = v.iter().sum::<f64>() / t;
        (v.into_iter().map(|a| a - m).collect(), m)
    };
    let var = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>() / (t - 1.0);
    let (full, full_mean) = centre(column(full_idx));
    let var_full = var(&full);
    let sd_full = var_full.sqrt();
    orders
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let (trunc, mean) = centre(column(k));
            let var_truncated = var(&trunc);
            let rem: Vec<f64> = full.iter().zip(&trunc).map(|(a, b)| a - b).collect();
            let prod: Vec<f64> = trunc.iter().zip(&rem).map(|(a, b)| a * b).collect();
            let cross = prod.iter().sum::<f64>() / t;
            let cross_var = prod.iter().map(|p| (p - cross).powi(2)).sum::<f64>() / (t - 1.0);
            let sd_n = var_truncated.sqrt();
            let delta = trunc
                .iter()
                .zip(&full)
                .map(|(a, b)| (a / sd_n - b / sd_full).powi(2))
                .sum::<f64>()
                / t;
            TruncationRow {
                n,
                var_truncated,
                var_remainder: var(&rem),
                var_full,
                cross_term: cross,
                cross_stderr: (cross_var / t).sqrt(),
                delta,
                mean_drift: mean - full_mean,
            }
        })
        .collect()
}
