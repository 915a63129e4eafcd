//! Polar tensor-product grids: Gauss–Legendre in the radius, uniform in
//! the angle.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::special::gauss_legendre;

#[derive(Clone, Debug, PartialEq)]
pub struct PolarGrid {
    center: Complex64,
    radii: Vec<f64>,
    radial_weights: Vec<f64>,
    angles: usize,
}

impl PolarGrid {
    /// `radial` GL nodes on `[0, radius]` times `angles` equispaced angles.
    pub fn new(center: Complex64, radius: f64, radial: usize, angles: usize) -> Self {
        let (radii, w) = gauss_legendre(radial, 0.0, radius);
        Self {
            center,
            radii,
            radial_weights: w,
            angles,
        }
    }

    /// Same layout on the annulus `inner ≤ |z - center| ≤ outer`.
    pub fn annulus(center: Complex64, inner: f64, outer: f64, radial: usize, angles: usize) -> Self {
        let (radii, w) = gauss_legendre(radial, inner, outer);
        Self {
            center,
            radii,
            radial_weights: w,
            angles,
        }
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn angles(&self) -> usize {
        self.angles
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.angles
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Area weight shared by every node on ring `i`.
    pub fn ring_weight(&self, i: usize) -> f64 {
        self.radial_weights[i] * self.radii[i] * 2.0 * PI / self.angles as f64
    }

    /// Node `k` on ring `i`, angle `2πk/angles`.
    pub fn node(&self, i: usize, k: usize) -> Complex64 {
        self.center + Complex64::from_polar(self.radii[i], 2.0 * PI * k as f64 / self.angles as f64)
    }

    /// All nodes, ring-major.
    pub fn nodes(&self) -> Vec<Complex64> {
        (0..self.radii.len())
            .flat_map(|i| (0..self.angles).map(move |k| (i, k)))
            .map(|(i, k)| self.node(i, k))
            .collect()
    }

    /// `∫ f dA` over the disk.
    pub fn integrate(&self, mut f: impl FnMut(Complex64) -> f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.radii.len() {
            let mut ring = 0.0;
            for k in 0..self.angles {
                ring += f(self.node(i, k));
            }
            total += ring * self.ring_weight(i);
        }
        total
    }
}
