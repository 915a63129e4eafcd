//! Zero sets of random sections: Aberth–Ehrlich for one variable, hidden
//! variable resultants for the product model.

mod bivariate;
mod univariate;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bivariate::{common_zeros_bivariate, BivariatePoly};
pub use univariate::{eval_with_derivative, roots_univariate, roots_univariate_scaled};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("all coefficients vanish")]
    DegenerateAllZero,
    #[error("resultant vanishes identically (non-transverse system)")]
    ResultantDegenerate,
    #[error("Newton polishing diverged for {0} candidates")]
    NewtonDiverged(usize),
    #[error("coefficient matrices must be square and of equal size")]
    BadShape,
}

/// Points in chart coordinates, `dim` coordinates each, stored flat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroSet {
    pub dim: usize,
    pub coords: Vec<Complex64>,
    /// Largest relative backward residual over the returned points.
    pub residual: f64,
    /// Zeros lost to the chart's point(s) at infinity.
    pub at_infinity: usize,
    pub degree_expected: usize,
    /// Candidates dropped after failed polishing.
    pub dropped: usize,
}

impl ZeroSet {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            residual: 0.0,
            at_infinity: 0,
            degree_expected: 0,
            dropped: 0,
        }
    }

    pub fn from_points(dim: usize, coords: Vec<Complex64>) -> Self {
        assert_eq!(coords.len() % dim, 0);
        let n = coords.len() / dim;
        Self {
            dim,
            coords,
            residual: 0.0,
            at_infinity: 0,
            degree_expected: n,
            dropped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[Complex64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[Complex64]> {
        self.coords.chunks(self.dim)
    }
}

/// Chordal distance on the Riemann sphere; `∞` is represented by a
/// non-finite value.
pub fn chordal(a: Complex64, b: Complex64) -> f64 {
    let fa = a.re.is_finite() && a.im.is_finite();
    let fb = b.re.is_finite() && b.im.is_finite();
    match (fa, fb) {
        (false, false) => 0.0,
        (false, true) => 1.0 / (1.0 + b.norm_sqr()).sqrt(),
        (true, false) => 1.0 / (1.0 + a.norm_sqr()).sqrt(),
        (true, true) => (a - b).norm() / ((1.0 + a.norm_sqr()) * (1.0 + b.norm_sqr())).sqrt(),
    }
}
