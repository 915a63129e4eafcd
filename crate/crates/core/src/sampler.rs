//! Gaussian random sections and the unit-variance field `ξ`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::gaussian::{GaussianStream, SeedPath};
use crate::kernels::{KernelError, ModelKind, SectionBasis};
use crate::quadrature::PolarGrid;

/// One draw `s^N = Σ ζ_j S_j^N`. For the product model `ζ` is stored
/// row-major, `ζ[j·(N+1) + k]` multiplying `S_j(z_1) S_k(z_2)`.
#[derive(Clone, Debug)]
pub struct SectionSample {
    basis: Arc<SectionBasis>,
    model: ModelKind,
    coeffs: Vec<Complex64>,
    seed: SeedPath,
}

/// Reusable sampler; holds the basis table shared by all draws.
#[derive(Clone, Debug)]
pub struct SectionSampler {
    model: ModelKind,
    basis: Arc<SectionBasis>,
}

impl SectionSampler {
    pub fn new(model: ModelKind, degree: u32) -> Result<Self, KernelError> {
        Ok(Self {
            model,
            basis: Arc::new(SectionBasis::new(model, degree)?),
        })
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn degree(&self) -> u32 {
        self.basis.degree()
    }

    pub fn basis(&self) -> &Arc<SectionBasis> {
        &self.basis
    }

    /// Number of coefficients `d_N` (or the truncation `J(N)`).
    pub fn coefficient_count(&self) -> usize {
        match self.model {
            ModelKind::ProductElliptic2 => self.basis.len() * self.basis.len(),
            _ => self.basis.len(),
        }
    }

    pub fn sample(&self, seed: SeedPath) -> SectionSample {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.coefficient_count()];
        GaussianStream::new(seed).fill_complex(&mut coeffs);
        self.with_coefficients(coeffs, seed)
    }

    /// Wrap caller-provided coefficients.
    pub fn with_coefficients(&self, coeffs: Vec<Complex64>, seed: SeedPath) -> SectionSample {
        assert_eq!(coeffs.len(), self.coefficient_count(), "coefficient count");
        SectionSample {
            basis: Arc::clone(&self.basis),
            model: self.model,
            coeffs,
            seed,
        }
    }
}

pub fn sample_section(model: ModelKind, degree: u32, seed: SeedPath) -> Result<SectionSample, KernelError> {
    Ok(SectionSampler::new(model, degree)?.sample(seed))
}

impl SectionSample {
    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn degree(&self) -> u32 {
        self.basis.degree()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn seed(&self) -> SeedPath {
        self.seed
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
        for &c in z {
            let bad =
                !c.re.is_finite() || !c.im.is_finite() || (self.model == ModelKind::Hyperbolic && c.norm() >= 1.0);
            if bad {
                return Err(KernelError::OutOfChart(format!("{c}")));
            }
        }
        Ok(())
    }

    /// `s^N(z)` in the chart trivialization, by Horner.
    pub fn eval_section(&self, z: &[Complex64]) -> Result<Complex64, KernelError> {
        self.check(z)?;
        let scale: Vec<f64> = self.basis.log_norm().iter().map(|l| l.exp()).collect();
        let horner = |c: &[Complex64], x: Complex64| {
            c.iter()
                .zip(&scale)
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, (a, s)| acc * x + a * s)
        };
        match self.model {
            ModelKind::ProductElliptic2 => {
                let n1 = self.basis.len();
                let rows: Vec<Complex64> = self.coeffs.chunks(n1).map(|row| horner(row, z[1])).collect();
                Ok(horner(&rows, z[0]))
            }
            _ => Ok(horner(&self.coeffs, z[0])),
        }
    }

    /// `ξ(z) = s^N(z) h(z)^{N/2} / √B_N`, with `E|ξ(z)|² = 1`.
    pub fn eval_field(&self, z: &[Complex64]) -> Result<Complex64, KernelError> {
        self.check(z)?;
        Ok(self.field_unchecked(z))
    }

    fn field_unchecked(&self, z: &[Complex64]) -> Complex64 {
        match self.model {
            ModelKind::ProductElliptic2 => {
                let n1 = self.basis.len();
                let rows: Vec<Complex64> = self
                    .coeffs
                    .chunks(n1)
                    .map(|row| rescaled_horner(&self.basis, row, z[1]))
                    .collect();
                // the outer sum carries unit coefficients times a_j(z_1)
                rescaled_horner(&self.basis, &rows, z[0])
            }
            _ => rescaled_horner(&self.basis, &self.coeffs, z[0]),
        }
    }

    /// `ξ` at every point of a flattened grid (`dim` coordinates per point).
    pub fn eval_field_grid(&self, grid: &[Complex64]) -> Result<Vec<Complex64>, KernelError> {
        let dim = self.model.dim();
        if !grid.len().is_multiple_of(dim) {
            return Err(KernelError::DimensionMismatch {
                expected: dim,
                got: grid.len() % dim,
            });
        }
        grid.chunks(dim).try_for_each(|p| self.check(p))?;
        Ok(grid.chunks(dim).map(|p| self.field_unchecked(p)).collect())
    }

    /// Coefficients of `s^N` as a polynomial in `z`, rescaled so the largest
    /// basis norm is 1. Zeros are unchanged by the rescaling.
    pub fn polynomial(&self) -> Vec<Complex64> {
        let ln = self.basis.log_norm();
        let top = ln.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.coeffs.iter().zip(ln).map(|(c, l)| c * (l - top).exp()).collect()
    }

    /// Product model: `P[(j, k)]` multiplies `z^j w^k`.
    pub fn bivariate_polynomial(&self) -> DMatrix<Complex64> {
        let ln = self.basis.log_norm();
        let top = ln.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let n1 = self.basis.len();
        DMatrix::from_fn(n1, n1, |j, k| {
            self.coeffs[j * n1 + k] * (ln[j] + ln[k] - 2.0 * top).exp()
        })
    }
}

/// `Σ_j c_j a_j(z)`: Horner in `z/|z|` on the radially rescaled
/// coefficients `c_j exp(ℓ_j + j log|z| + N/2 log h(z) − ½ log B_N)`.
fn rescaled_horner(basis: &SectionBasis, coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let r = z.norm();
    let shift = 0.5 * f64::from(basis.degree()) * basis.log_weight(z) - 0.5 * basis.log_bergman();
    let ln = basis.log_norm();
    if r == 0.0 {
        return coeffs[0] * (ln[0] + shift).exp();
    }
    let unit = z / r;
    let lr = r.ln();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in (0..coeffs.len()).rev() {
        acc = acc * unit + coeffs[j] * (ln[j] + j as f64 * lr + shift).exp();
    }
    acc
}

/// Batch evaluator of `ξ` on a polar grid centred at the chart origin: on
/// each ring, `ξ(r e^{iθ_k}) = Σ_j ζ_j a_j(r) e^{ijθ_k}` is one inverse FFT.
pub struct RingEvaluator {
    grid: PolarGrid,
    amplitudes: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl RingEvaluator {
    pub fn new(basis: &SectionBasis, grid: PolarGrid) -> Result<Self, KernelError> {
        if grid.center() != Complex64::new(0.0, 0.0) {
            return Err(KernelError::OutOfChart("ring grid must be centred at 0".into()));
        }
        if basis.model() == ModelKind::Hyperbolic && grid.radii().iter().any(|&r| r >= 1.0) {
            return Err(KernelError::OutOfChart("ring radius ≥ 1".into()));
        }
        let n = f64::from(basis.degree());
        let amplitudes = grid
            .radii()
            .iter()
            .map(|&r| {
                let z = Complex64::new(r, 0.0);
                let shift = 0.5 * n * basis.log_weight(z) - 0.5 * basis.log_bergman();
                basis
                    .log_norm()
                    .iter()
                    .enumerate()
                    .map(|(j, l)| (l + j as f64 * r.ln() + shift).exp())
                    .collect()
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_inverse(grid.angles());
        Ok(Self { grid, amplitudes, fft })
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    /// `ξ` at every node, ring-major (same order as [`PolarGrid::nodes`]).
    pub fn eval(&self, sample: &SectionSample) -> Vec<Complex64> {
        let m = self.grid.angles();
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for (ring, amps) in out.chunks_mut(m).zip(&self.amplitudes) {
            for (j, (c, a)) in sample.coeffs().iter().zip(amps).enumerate() {
                ring[j % m] += c * a;
            }
            self.fft.process_with_scratch(ring, &mut scratch);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_counts() {
        let s = sample_section(ModelKind::Elliptic, 3, SeedPath::new(1, 0, 0)).unwrap();
        assert_eq!(s.coeffs().len(), 4);
        let p = sample_section(ModelKind::ProductElliptic2, 2, SeedPath::new(1, 0, 0)).unwrap();
        assert_eq!(p.coeffs().len(), 9);
    }

    #[test]
    fn elliptic_field_at_origin_is_leading_coefficient() {
        let s = sample_section(ModelKind::Elliptic, 40, SeedPath::new(5, 2, 0)).unwrap();
        let xi = s.eval_field(&[Complex64::new(0.0, 0.0)]).unwrap();
        assert!((xi - s.coeffs()[0]).norm() < 1e-14);
    }

    #[test]
    fn field_matches_section_times_weight() {
        let s = sample_section(ModelKind::Hyperbolic, 12, SeedPath::new(3, 1, 0)).unwrap();
        let z = Complex64::new(0.3, -0.4);
        let sec = s.eval_section(&[z]).unwrap();
        let expected = sec * (1.0 - z.norm_sqr()).powf(6.0) / (11.0 / std::f64::consts::PI).sqrt();
        let xi = s.eval_field(&[z]).unwrap();
        assert!((xi - expected).norm() < 1e-12 * expected.norm().max(1.0));
    }

    #[test]
    fn ring_evaluator_agrees_with_pointwise() {
        let sampler = SectionSampler::new(ModelKind::Elliptic, 30).unwrap();
        let s = sampler.sample(SeedPath::new(9, 4, 0));
        let grid = PolarGrid::new(Complex64::new(0.0, 0.0), 3.0, 5, 16);
        let ring = RingEvaluator::new(sampler.basis(), grid.clone()).unwrap();
        let fast = ring.eval(&s);
        for (v, z) in fast.iter().zip(grid.nodes()) {
            assert!((v - s.eval_field(&[z]).unwrap()).norm() < 1e-12);
        }
    }
}
