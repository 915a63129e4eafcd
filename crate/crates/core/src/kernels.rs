//! Model geometries: orthonormal bases, Bergman functions, normalized Szegő
//! kernels and the truncated pluri-bipotential.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{dilog, dilog_truncated, ln_binomial, ln_factorial, EULER_GAMMA};

/// Radius of the flat evaluation domain used for basis truncation.
pub const FLAT_DOMAIN_RADIUS: f64 = 4.0;
/// Radius of the hyperbolic evaluation domain used for basis truncation.
pub const HYPERBOLIC_DOMAIN_RADIUS: f64 = 0.95;
/// Relative tail bound for truncated infinite bases.
pub const TRUNCATION_TAIL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("point {0} lies outside the model chart")]
    OutOfChart(String),
    #[error("expected a {expected}-dimensional point, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid degree {0} for this model")]
    InvalidDegree(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Elliptic,
    Flat,
    Hyperbolic,
    ProductElliptic2,
}

impl ModelKind {
    /// Complex dimension `m` of the chart.
    pub fn dim(self) -> usize {
        match self {
            ModelKind::ProductElliptic2 => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Elliptic => "elliptic",
            ModelKind::Flat => "flat",
            ModelKind::Hyperbolic => "hyperbolic",
            ModelKind::ProductElliptic2 => "product",
        }
    }

    /// The one-variable factor geometry.
    pub fn factor(self) -> ModelKind {
        match self {
            ModelKind::ProductElliptic2 => ModelKind::Elliptic,
            other => other,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "elliptic" => Ok(ModelKind::Elliptic),
            "flat" => Ok(ModelKind::Flat),
            "hyperbolic" => Ok(ModelKind::Hyperbolic),
            "product" | "product-elliptic2" | "productelliptic2" => Ok(ModelKind::ProductElliptic2),
            other => Err(format!("unknown model '{other}'")),
        }
    }
}

/// Kernel truncation order: a finite `n` or the full series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Truncation {
    Order(u32),
    Full,
}

impl Truncation {
    pub fn order(self) -> Option<u32> {
        match self {
            Truncation::Order(n) => Some(n),
            Truncation::Full => None,
        }
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truncation::Order(n) => write!(f, "{n}"),
            Truncation::Full => f.write_str("inf"),
        }
    }
}

impl FromStr for Truncation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "infinity" | "full" => Ok(Truncation::Full),
            t => t
                .parse::<u32>()
                .map(Truncation::Order)
                .map_err(|_| format!("bad truncation '{t}'")),
        }
    }
}

/// One-variable basis data: `f_j(z) = exp(log_norm[j]) z^j`, weight
/// `exp(N · log_weight(z))`.
#[derive(Clone, Debug)]
pub struct SectionBasis {
    model: ModelKind,
    degree: u32,
    log_norm: Vec<f64>,
}

impl SectionBasis {
    /// Basis of the one-variable factor of `model`.
    pub fn new(model: ModelKind, degree: u32) -> Result<Self, KernelError> {
        let factor = model.factor();
        validate_degree(factor, degree)?;
        let n = f64::from(degree);
        let len = basis_len(factor, degree);
        let log_norm = (0..len as u64)
            .map(|j| match factor {
                ModelKind::Elliptic => 0.5 * (((n + 1.0) / PI).ln() + ln_binomial(u64::from(degree), j)),
                ModelKind::Flat => 0.5 * ((j as f64 + 1.0) * n.ln() - PI.ln() - ln_factorial(j)),
                ModelKind::Hyperbolic => 0.5 * (((n - 1.0) / PI).ln() + ln_binomial(u64::from(degree) + j - 1, j)),
                ModelKind::ProductElliptic2 => unreachable!(),
            })
            .collect();
        Ok(Self {
            model: factor,
            degree,
            log_norm,
        })
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.log_norm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_norm.is_empty()
    }

    pub fn log_norm(&self) -> &[f64] {
        &self.log_norm
    }

    /// `log` of the pointwise weight `h(z)`; the metric on `L^N` is `h^N`.
    pub fn log_weight(&self, z: Complex64) -> f64 {
        log_weight(self.model, z)
    }

    /// `log B_N` (constant on every model).
    pub fn log_bergman(&self) -> f64 {
        bergman_constant(self.model, self.degree).ln()
    }

    /// Coefficients `a_j(z)` with `ξ(z) = Σ ζ_j a_j(z)`.
    pub fn field_weights(&self, z: Complex64) -> Result<Vec<Complex64>, KernelError> {
        check_chart(self.model, z)?;
        let r = z.norm();
        let unit = if r > 0.0 { z / r } else { Complex64::new(1.0, 0.0) };
        let shift = 0.5 * f64::from(self.degree) * self.log_weight(z) - 0.5 * self.log_bergman();
        let lr = r.ln();
        let mut phase = Complex64::new(1.0, 0.0);
        let mut out = Vec::with_capacity(self.len());
        for (j, &l) in self.log_norm.iter().enumerate() {
            let mag = if r == 0.0 {
                if j == 0 {
                    (l + shift).exp()
                } else {
                    0.0
                }
            } else {
                (l + j as f64 * lr + shift).exp()
            };
            out.push(phase * mag);
            phase *= unit;
        }
        Ok(out)
    }
}

fn validate_degree(model: ModelKind, degree: u32) -> Result<(), KernelError> {
    let ok = match model {
        ModelKind::Hyperbolic => degree >= 2,
        _ => degree >= 1,
    };
    if ok {
        Ok(())
    } else {
        Err(KernelError::InvalidDegree(degree))
    }
}

pub(crate) fn log_weight(model: ModelKind, z: Complex64) -> f64 {
    match model {
        ModelKind::Elliptic | ModelKind::ProductElliptic2 => -z.norm_sqr().ln_1p(),
        ModelKind::Flat => -z.norm_sqr(),
        ModelKind::Hyperbolic => (-z.norm_sqr()).ln_1p(),
    }
}

/// `B_N` for the one-variable factor.
fn bergman_constant(model: ModelKind, degree: u32) -> f64 {
    let n = f64::from(degree);
    match model {
        ModelKind::Elliptic | ModelKind::ProductElliptic2 => (n + 1.0) / PI,
        ModelKind::Flat => n / PI,
        ModelKind::Hyperbolic => (n - 1.0) / PI,
    }
}

fn check_chart(model: ModelKind, z: Complex64) -> Result<(), KernelError> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(KernelError::OutOfChart(format!("{z}")));
    }
    if model == ModelKind::Hyperbolic && z.norm() >= 1.0 {
        return Err(KernelError::OutOfChart(format!("{z}")));
    }
    Ok(())
}

/// Number of basis functions kept for the factor model.
fn basis_len(model: ModelKind, degree: u32) -> usize {
    match model {
        ModelKind::Elliptic | ModelKind::ProductElliptic2 => degree as usize + 1,
        ModelKind::Flat => truncation_index(model, degree, FLAT_DOMAIN_RADIUS),
        ModelKind::Hyperbolic => truncation_index(model, degree, HYPERBOLIC_DOMAIN_RADIUS),
    }
}

/// Smallest `J` with `Σ_{j ≥ J} |f_j(z)|² h^N(z) ≤ 1e-14 · B_N` for all
/// `|z| ≤ radius`, from the ratio-test tail bound `t_J / (1 - q_J)`.
///
/// The term ratios `q_j = t_{j+1}/t_j` decrease in `j`, so once `q_J < 1` the
/// tail is dominated by a geometric series. Each term is increasing in `|z|`
/// after normalisation by the weight on the relevant range, so the bound is
/// evaluated at `radius`.
pub fn truncation_index(model: ModelKind, degree: u32, radius: f64) -> usize {
    let n = f64::from(degree);
    let r2 = radius * radius;
    match model {
        ModelKind::Elliptic | ModelKind::ProductElliptic2 => degree as usize + 1,
        ModelKind::Flat => {
            // t_j / B_N = (N r²)^j / j! · e^{-N r²}
            let x = n * r2;
            let mut log_t = -x;
            let mut j = 0usize;
            loop {
                let q = x / (j as f64 + 1.0);
                if q < 1.0 && log_t - (1.0 - q).ln() < TRUNCATION_TAIL.ln() {
                    return j.max(1);
                }
                log_t += q.ln();
                j += 1;
            }
        }
        ModelKind::Hyperbolic => {
            // t_j / B_N = C(N+j-1, j) r^{2j} (1 - r²)^N
            let mut log_t = n * (-r2).ln_1p();
            let mut j = 0usize;
            loop {
                let jf = j as f64;
                let q = (n + jf) / (jf + 1.0) * r2;
                if q < 1.0 && log_t - (1.0 - q).ln() < TRUNCATION_TAIL.ln() {
                    return j.max(1);
                }
                log_t += q.ln();
                j += 1;
            }
        }
    }
}

/// Kernel evaluator for one `(model, N)` pair. Points are coordinate
/// slices of length `model.dim()`.
#[derive(Clone, Debug)]
pub struct KernelEval {
    model: ModelKind,
    degree: u32,
    basis: SectionBasis,
}

impl KernelEval {
    pub fn new(model: ModelKind, degree: u32) -> Result<Self, KernelError> {
        Ok(Self {
            model,
            degree,
            basis: SectionBasis::new(model, degree)?,
        })
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn basis(&self) -> &SectionBasis {
        &self.basis
    }

    fn check(&self, z: &[Complex64]) -> Result<(), KernelError> {
        if z.len() != self.model.dim() {
            return Err(KernelError::DimensionMismatch {
                expected: self.model.dim(),
                got: z.len(),
            });
        }
        z.iter().try_for_each(|&c| check_chart(self.model, c))
    }

    /// `B_N(z) = Σ_j |S_j(z)|²_{h^N}` summed over the (truncated) basis.
    pub fn bergman(&self, z: &[Complex64]) -> Result<f64, KernelError> {
        self.check(z)?;
        let n = f64::from(self.degree);
        let factor = |c: Complex64| -> f64 {
            let r2 = c.norm_sqr();
            let lw = n * log_weight(self.model.factor(), c);
            let lr2 = r2.ln();
            self.basis
                .log_norm
                .iter()
                .enumerate()
                .map(|(j, &l)| {
                    if j == 0 {
                        (2.0 * l + lw).exp()
                    } else if r2 == 0.0 {
                        0.0
                    } else {
                        (2.0 * l + j as f64 * lr2 + lw).exp()
                    }
                })
                .sum()
        };
        Ok(z.iter().map(|&c| factor(c)).product())
    }

    /// The constant value of `B_N`.
    pub fn bergman_exact(&self) -> f64 {
        let b = bergman_constant(self.model, self.degree);
        if self.model == ModelKind::ProductElliptic2 {
            b * b
        } else {
            b
        }
    }

    fn rho_factor(&self, z: Complex64, w: Complex64) -> Complex64 {
        let n = f64::from(self.degree);
        let zw = z * w.conj();
        match self.model.factor() {
            ModelKind::Elliptic => {
                let log_mod =
                    n * (0.5 * (1.0 + zw).norm_sqr().ln() - 0.5 * z.norm_sqr().ln_1p() - 0.5 * w.norm_sqr().ln_1p());
                Complex64::from_polar(log_mod.exp(), n * (1.0 + zw).arg())
            }
            ModelKind::Flat => Complex64::from_polar((-0.5 * n * (z - w).norm_sqr()).exp(), n * zw.im),
            ModelKind::Hyperbolic => {
                let log_mod = n
                    * (0.5 * (-z.norm_sqr()).ln_1p() + 0.5 * (-w.norm_sqr()).ln_1p()
                        - 0.5 * (1.0 - zw).norm_sqr().ln());
                Complex64::from_polar(log_mod.exp(), -n * (1.0 - zw).arg())
            }
            ModelKind::ProductElliptic2 => unreachable!(),
        }
    }

    /// Normalized Szegő kernel `ρ_N(z, w) = E[ξ(z) conj ξ(w)]`, closed form.
    pub fn rho(&self, z: &[Complex64], w: &[Complex64]) -> Result<Complex64, KernelError> {
        self.check(z)?;
        self.check(w)?;
        Ok(z.iter().zip(w).map(|(&a, &b)| self.rho_factor(a, b)).product())
    }

    /// `ρ_N` from the explicit (truncated) basis sum.
    pub fn rho_series(&self, z: &[Complex64], w: &[Complex64]) -> Result<Complex64, KernelError> {
        self.check(z)?;
        self.check(w)?;
        let mut out = Complex64::new(1.0, 0.0);
        for (&a, &b) in z.iter().zip(w) {
            let fa = self.basis.field_weights(a)?;
            let fb = self.basis.field_weights(b)?;
            out *= fa.iter().zip(&fb).map(|(x, y)| x * y.conj()).sum::<Complex64>();
        }
        Ok(out)
    }

    /// `P_N(z, w) = |ρ_N(z, w)|`.
    pub fn p_mod(&self, z: &[Complex64], w: &[Complex64]) -> Result<f64, KernelError> {
        Ok(self.rho(z, w)?.norm())
    }

    /// `Q_N^{[n]} = γ²/4π² + (1/4π²) Σ_{α ≤ n} P^{2α}/α²`.
    pub fn q_trunc(&self, n: Truncation, z: &[Complex64], w: &[Complex64]) -> Result<f64, KernelError> {
        let p = self.p_mod(z, w)?;
        Ok(q_from_p(p, n))
    }

    /// Geodesic distance of the model metric (product: ℓ² of factors).
    pub fn distance(&self, z: &[Complex64], w: &[Complex64]) -> Result<f64, KernelError> {
        self.check(z)?;
        self.check(w)?;
        let d2: f64 = z
            .iter()
            .zip(w)
            .map(|(&a, &b)| factor_distance(self.model.factor(), a, b).powi(2))
            .sum();
        Ok(d2.sqrt())
    }

    /// `|P_N(u/√N, v/√N) − exp(−|u−v|²/2)|` at the chart origin.
    pub fn scaling_deficit(&self, u: &[Complex64], v: &[Complex64]) -> Result<f64, KernelError> {
        let s = f64::from(self.degree).sqrt();
        let zu: Vec<Complex64> = u.iter().map(|c| c / s).collect();
        let zv: Vec<Complex64> = v.iter().map(|c| c / s).collect();
        let limit = (-0.5 * u.iter().zip(v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()).exp();
        Ok((self.p_mod(&zu, &zv)? - limit).abs())
    }

    /// Largest [`Self::scaling_deficit`] over pairs from a `side × side`
    /// lattice on `[−reach, reach]²` restricted to the disk of radius
    /// `reach`. Product models move the first coordinate only.
    pub fn max_scaling_deficit(&self, reach: f64, side: usize) -> Result<f64, KernelError> {
        let step = 2.0 * reach / (side.max(2) - 1) as f64;
        let mut lattice = Vec::new();
        for a in 0..side {
            for b in 0..side {
                let u = Complex64::new(-reach + a as f64 * step, -reach + b as f64 * step);
                if u.norm() <= reach + 1e-12 {
                    lattice.push(u);
                }
            }
        }
        let lift = |u: Complex64| -> Vec<Complex64> {
            let mut p = vec![Complex64::new(0.0, 0.0); self.model.dim()];
            p[0] = u;
            p
        };
        let mut worst = 0.0f64;
        for &u in &lattice {
            for &v in &lattice {
                worst = worst.max(self.scaling_deficit(&lift(u), &lift(v))?);
            }
        }
        Ok(worst)
    }

    /// Largest `P_N(z, w)` over probe pairs at distance at least
    /// `b·√(log N / N)`.
    pub fn offdiag_decay(&self, b: f64) -> f64 {
        let n = f64::from(self.degree);
        let threshold = b * (n.ln() / n).sqrt();
        let points = probe_points(self.model, offdiag_probe_side(self.model));
        let mut worst = 0.0f64;
        for z in &points {
            for w in &points {
                if self.distance(z, w).unwrap_or(0.0) >= threshold {
                    worst = worst.max(self.p_mod(z, w).unwrap_or(0.0));
                }
            }
        }
        worst
    }
}

fn offdiag_probe_side(model: ModelKind) -> usize {
    match model {
        ModelKind::ProductElliptic2 => 6,
        _ => 20,
    }
}

fn factor_distance(model: ModelKind, z: Complex64, w: Complex64) -> f64 {
    match model {
        ModelKind::Elliptic | ModelKind::ProductElliptic2 => {
            let c = (1.0 + z * w.conj()).norm() / ((1.0 + z.norm_sqr()) * (1.0 + w.norm_sqr())).sqrt();
            // acos loses precision near 1; use the chordal sine there
            let s = (z - w).norm() / ((1.0 + z.norm_sqr()) * (1.0 + w.norm_sqr())).sqrt();
            s.atan2(c)
        }
        ModelKind::Flat => (z - w).norm(),
        ModelKind::Hyperbolic => ((z - w).norm() / (1.0 - z * w.conj()).norm()).atanh(),
    }
}

/// `Q^{[n]}` as a function of `P`.
pub fn q_from_p(p: f64, n: Truncation) -> f64 {
    let x = (p * p).min(1.0);
    let series = match n {
        Truncation::Full => dilog(x),
        Truncation::Order(k) => dilog_truncated(x, k),
    };
    (EULER_GAMMA * EULER_GAMMA + series) / (4.0 * PI * PI)
}

/// Largest chart modulus sampled by the probe grids.
pub fn probe_radius(model: ModelKind) -> f64 {
    match model {
        ModelKind::Hyperbolic => 0.9,
        _ => 2.0,
    }
}

/// A `side × side` lattice filling the square inscribed in the probe disk;
/// for the product model the lattice is taken in each factor and paired
/// diagonally with a reversed copy.
pub fn probe_points(model: ModelKind, side: usize) -> Vec<Vec<Complex64>> {
    let half = probe_radius(model) / std::f64::consts::SQRT_2;
    let coord = |k: usize| -> f64 {
        if side == 1 {
            0.0
        } else {
            -half + 2.0 * half * k as f64 / (side - 1) as f64
        }
    };
    let lattice: Vec<Complex64> = (0..side)
        .flat_map(|a| (0..side).map(move |b| (a, b)))
        .map(|(a, b)| Complex64::new(coord(a), coord(b)))
        .collect();
    match model.dim() {
        1 => lattice.into_iter().map(|z| vec![z]).collect(),
        _ => lattice
            .iter()
            .zip(lattice.iter().rev())
            .map(|(&a, &b)| vec![a, b])
            .collect(),
    }
}
