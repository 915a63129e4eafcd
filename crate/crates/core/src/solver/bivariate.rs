use nalgebra::{DMatrix, Matrix2, Vector2};
use num_complex::Complex64;
use rustfft::FftPlanner;

use super::univariate::roots_univariate;
use super::{chordal, SolverError, ZeroSet};

const MATCH_RADIUS: f64 = 1e-4;
const DEDUP_RADIUS: f64 = 1e-8;
const DEGENERATE: f64 = 1e-12;
const ACCEPT: f64 = 1e-10;

/// `Σ P[(j, k)] z^j w^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct BivariatePoly {
    c: DMatrix<Complex64>,
}

impl BivariatePoly {
    pub fn new(c: DMatrix<Complex64>) -> Self {
        Self { c }
    }

    pub fn coefficients(&self) -> &DMatrix<Complex64> {
        &self.c
    }

    pub fn degree_z(&self) -> usize {
        self.c.nrows() - 1
    }

    pub fn degree_w(&self) -> usize {
        self.c.ncols() - 1
    }

    /// `(value, ∂_z, ∂_w, Σ|c| max(1,|z|)^j max(1,|w|)^k)`; the last entry is
    /// the coefficient scale used for residuals.
    pub fn eval(&self, z: Complex64, w: Complex64) -> (Complex64, Complex64, Complex64, f64) {
        let zero = Complex64::new(0.0, 0.0);
        let (mut v, mut dz, mut dw, mut b) = (zero, zero, zero, 0.0);
        let (az, aw) = (z.norm().max(1.0), w.norm().max(1.0));
        for j in (0..self.c.nrows()).rev() {
            let (mut r, mut dr, mut rb) = (zero, zero, 0.0);
            for k in (0..self.c.ncols()).rev() {
                dr = dr * w + r;
                r = r * w + self.c[(j, k)];
                rb = rb * aw + self.c[(j, k)].norm();
            }
            dz = dz * z + v;
            v = v * z + r;
            dw = dw * z + dr;
            b = b * az + rb;
        }
        (v, dz, dw, b)
    }

    /// Coefficients in `w` at fixed `z`.
    pub fn coefficients_in_w(&self, z: Complex64) -> Vec<Complex64> {
        (0..self.c.ncols())
            .map(|k| {
                (0..self.c.nrows())
                    .rev()
                    .fold(Complex64::new(0.0, 0.0), |acc, j| acc * z + self.c[(j, k)])
            })
            .collect()
    }

    /// Coefficients in `w` and their `z`-derivatives at fixed `z`.
    pub fn coefficients_in_w_with_derivative(&self, z: Complex64) -> (Vec<Complex64>, Vec<Complex64>) {
        let zero = Complex64::new(0.0, 0.0);
        (0..self.c.ncols())
            .map(|k| {
                (0..self.c.nrows())
                    .rev()
                    .fold((zero, zero), |(v, d), j| (v * z + self.c[(j, k)], d * z + v))
            })
            .unzip()
    }

    /// The same polynomial in the chart `u = 1/z` (`u^{d} p(1/u, w)`).
    pub fn flip_z(&self) -> Self {
        let n = self.c.nrows();
        Self::new(DMatrix::from_fn(n, self.c.ncols(), |j, k| self.c[(n - 1 - j, k)]))
    }

    /// The same polynomial in the chart `v = 1/w`.
    pub fn flip_w(&self) -> Self {
        let m = self.c.ncols();
        Self::new(DMatrix::from_fn(self.c.nrows(), m, |j, k| self.c[(j, m - 1 - k)]))
    }
}

fn sylvester(a: &[Complex64], b: &[Complex64]) -> DMatrix<Complex64> {
    let n = a.len() - 1;
    let m = b.len() - 1;
    let size = n + m;
    let mut s = DMatrix::from_element(size, size, Complex64::new(0.0, 0.0));
    for i in 0..m {
        for (t, c) in a.iter().rev().enumerate() {
            s[(i, i + t)] = *c;
        }
    }
    for i in 0..n {
        for (t, c) in b.iter().rev().enumerate() {
            s[(m + i, i + t)] = *c;
        }
    }
    s
}

/// Sylvester matrix of `p(z, ·)`, `q(z, ·)` and its derivative in `z`.
fn sylvester_with_derivative(
    p: &BivariatePoly,
    q: &BivariatePoly,
    z: Complex64,
) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let (a, da) = p.coefficients_in_w_with_derivative(z);
    let (b, db) = q.coefficients_in_w_with_derivative(z);
    (sylvester(&a, &b), sylvester(&da, &db))
}

/// Samples of the resultant at the `k`-th roots of unity; fails when the
/// resultant vanishes identically.
fn resultant_samples(p: &BivariatePoly, q: &BivariatePoly, k: usize) -> Result<Vec<Complex64>, SolverError> {
    let mut values = Vec::with_capacity(k);
    // one well-conditioned Sylvester matrix proves the resultant is nonzero;
    // det over the Hadamard bound is useless here since it decays with size
    let mut regular = false;
    for t in 0..k {
        let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t as f64 / k as f64);
        let s = sylvester(&p.coefficients_in_w(z), &q.coefficients_in_w(z));
        if !regular {
            let sv = s.singular_values();
            let (lo, hi) = (sv.min(), sv.max());
            regular = hi > 0.0 && lo > DEGENERATE * hi;
        }
        values.push(s.lu().determinant());
    }
    if !regular {
        return Err(SolverError::ResultantDegenerate);
    }
    Ok(values)
}

/// Approximate roots of `Res_w(p, q)` inside the closed unit disk, from FFT
/// interpolation at roots of unity. Accurate near the unit circle only;
/// used as starting points.
fn interpolated_roots(p: &BivariatePoly, q: &BivariatePoly, degree: usize) -> Result<Vec<Complex64>, SolverError> {
    let k = (degree + 1).next_power_of_two();
    let mut values = resultant_samples(p, q, k)?;
    FftPlanner::new().plan_fft_forward(k).process(&mut values);
    let coeffs: Vec<Complex64> = values[..=degree].iter().map(|v| v / k as f64).collect();
    Ok(roots_univariate(&coeffs)?
        .points()
        .map(|z| z[0])
        .filter(|z| z.norm() <= 1.0)
        .collect())
}

/// `R'/R` for `R = Res_w(p, q)` by Jacobi's formula, `tr(S⁻¹ S')`.
/// `None` when the Sylvester matrix is numerically singular.
fn resultant_logder(p: &BivariatePoly, q: &BivariatePoly, z: Complex64) -> Option<Complex64> {
    let (s, ds) = sylvester_with_derivative(p, q, z);
    let x = s.lu().solve(&ds)?;
    let tr = x.trace();
    (tr.re.is_finite() && tr.im.is_finite()).then_some(tr)
}

/// All `degree` roots of `Res_w(p, q)` on the Riemann sphere (finite
/// values only; a root at `z = ∞` comes back as a very large modulus).
///
/// Aberth–Ehrlich with the logarithmic derivative evaluated exactly from
/// the Sylvester matrix, in the chart `u = 1/z` outside the unit disk.
fn resultant_roots(p: &BivariatePoly, q: &BivariatePoly) -> Result<Vec<Complex64>, SolverError> {
    let degree = p.degree_z() * q.degree_w() + q.degree_z() * p.degree_w();
    let (pu, qu) = (p.flip_z(), q.flip_z());
    let inner = interpolated_roots(p, q, degree)?;
    let outer: Vec<Complex64> = interpolated_roots(&pu, &qu, degree)?
        .into_iter()
        .filter(|u| u.norm() < 1.0)
        .map(|u| {
            if u.norm() > 1e-300 {
                u.inv()
            } else {
                Complex64::new(1e300, 0.0)
            }
        })
        .collect();
    let mut z: Vec<Complex64> = inner.into_iter().chain(outer).collect();
    // pad or trim to the expected count; Aberth repairs the placement
    z.sort_by(|a, b| (a.norm().ln().abs()).total_cmp(&b.norm().ln().abs()).reverse());
    while z.len() > degree {
        z.pop();
    }
    while z.len() < degree {
        let theta = 2.399_963_229_728_653 * z.len() as f64;
        z.push(Complex64::from_polar(1.0, theta));
    }
    let mdeg = degree as f64;
    let newton = |x: Complex64| -> Option<Complex64> {
        if x.norm() <= 1.0 {
            resultant_logder(p, q, x).map(|l| l.inv())
        } else {
            let w = x.inv();
            resultant_logder(&pu, &qu, w).map(|l| (w * (mdeg - w * l)).inv())
        }
    };
    let mut done = vec![false; degree];
    for _ in 0..100 {
        let mut active = false;
        for i in 0..degree {
            if done[i] {
                continue;
            }
            active = true;
            let Some(ratio) = newton(z[i]) else {
                done[i] = true;
                continue;
            };
            let sum: Complex64 = z
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, zj)| (z[i] - zj).inv())
                .sum();
            let step = ratio / (1.0 - ratio * sum);
            if !(step.re.is_finite() && step.im.is_finite()) {
                done[i] = true;
                continue;
            }
            // measure convergence chordally so roots near ∞ also settle
            let next = z[i] - step;
            let moved = super::chordal(z[i], next);
            z[i] = next;
            if moved <= 1e-14 {
                done[i] = true;
            }
        }
        if !active {
            break;
        }
    }
    Ok(z)
}

/// Chart choice of one coordinate: identity or inversion.
#[derive(Clone, Copy, PartialEq)]
enum Chart {
    Direct,
    Inverted,
}

impl Chart {
    fn to_global(self, x: Complex64) -> Option<Complex64> {
        match self {
            Chart::Direct => Some(x),
            Chart::Inverted if x == Complex64::new(0.0, 0.0) => None,
            Chart::Inverted => Some(x.inv()),
        }
    }
}

fn chart_poly(p: &BivariatePoly, cz: Chart, cw: Chart) -> BivariatePoly {
    let p = if cz == Chart::Inverted { p.flip_z() } else { p.clone() };
    if cw == Chart::Inverted {
        p.flip_w()
    } else {
        p
    }
}

/// Newton on `(p, q) = 0`; returns the point and the larger relative
/// residual.
fn polish(p: &BivariatePoly, q: &BivariatePoly, mut x: Complex64, mut y: Complex64) -> (Complex64, Complex64, f64) {
    let residual = |x: Complex64, y: Complex64| {
        let (pv, _, _, pb) = p.eval(x, y);
        let (qv, _, _, qb) = q.eval(x, y);
        (pv.norm() / pb.max(f64::MIN_POSITIVE)).max(qv.norm() / qb.max(f64::MIN_POSITIVE))
    };
    let mut best = residual(x, y);
    for _ in 0..30 {
        let (pv, px, py, _) = p.eval(x, y);
        let (qv, qx, qy, _) = q.eval(x, y);
        let jac = Matrix2::new(px, py, qx, qy);
        let Some(inv) = jac.try_inverse() else { break };
        let step = inv * Vector2::new(pv, qv);
        let (nx, ny) = (x - step[0], y - step[1]);
        let r = residual(nx, ny);
        if !(r < best) && r > 4.0 * f64::EPSILON {
            break;
        }
        let small = step.norm() <= 1e-15 * (1.0 + x.norm() + y.norm());
        x = nx;
        y = ny;
        best = r.min(best);
        if small || best <= f64::EPSILON {
            break;
        }
    }
    (x, y, best)
}

/// Common zeros of two polynomials of bidegree `(N, N)` on `P¹ × P¹`.
pub fn common_zeros_bivariate(p: &BivariatePoly, q: &BivariatePoly) -> Result<ZeroSet, SolverError> {
    let (pc, qc) = (p.coefficients(), q.coefficients());
    if pc.shape() != qc.shape() || pc.nrows() != pc.ncols() || pc.nrows() < 2 {
        return Err(SolverError::BadShape);
    }
    let normalize = |m: &DMatrix<Complex64>| -> Result<BivariatePoly, SolverError> {
        let s = m.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if !(s > 1e-300) {
            return Err(SolverError::DegenerateAllZero);
        }
        Ok(BivariatePoly::new(m.map(|c| c / s)))
    };
    let (p, q) = (normalize(pc)?, normalize(qc)?);
    let expected = 2 * p.degree_z() * p.degree_w();

    let mut found: Vec<(Complex64, Complex64)> = Vec::new();
    let mut infinite: Vec<(Option<Complex64>, Option<Complex64>)> = Vec::new();
    let mut residual: f64 = 0.0;
    let mut dropped = 0;
    for root in resultant_roots(&p, &q)? {
        let (cz, x) = if root.norm() <= 1.0 {
            (Chart::Direct, root)
        } else {
            (Chart::Inverted, root.inv())
        };
        let (pz, qz) = (chart_poly(&p, cz, Chart::Direct), chart_poly(&q, cz, Chart::Direct));
        {
            // a polynomial vanishing on the whole fibre leaves the other to decide
            let (wp, wq) = match (roots_in_w(&pz, x), roots_in_w(&qz, x)) {
                (Some(a), Some(b)) => (a, b),
                (Some(a), None) => (a.clone(), a),
                (None, Some(b)) => (b.clone(), b),
                (None, None) => continue,
            };
            for &a in &wp {
                let Some((b, dist)) = wq
                    .iter()
                    .map(|&b| (b, chordal(a, b)))
                    .min_by(|s, t| s.1.total_cmp(&t.1))
                else {
                    continue;
                };
                if dist > MATCH_RADIUS {
                    continue;
                }
                let guess = if a.is_finite() && b.is_finite() {
                    0.5 * (a + b)
                } else {
                    a
                };
                let cw = if guess.is_finite() && guess.norm() <= 1.0 {
                    Chart::Direct
                } else {
                    Chart::Inverted
                };
                let y0 = match cw {
                    Chart::Direct => guess,
                    Chart::Inverted if guess.is_finite() => guess.inv(),
                    Chart::Inverted => Complex64::new(0.0, 0.0),
                };
                let (pp, qq) = (chart_poly(&p, cz, cw), chart_poly(&q, cz, cw));
                let (x1, y1, r) = polish(&pp, &qq, x, y0);
                if !(r <= ACCEPT) {
                    dropped += 1;
                    continue;
                }
                let (gz, gw) = (cz.to_global(x1), cw.to_global(y1));
                match (gz, gw) {
                    (Some(z), Some(w)) => {
                        if !found
                            .iter()
                            .any(|&(fz, fw)| chordal(fz, z) < DEDUP_RADIUS && chordal(fw, w) < DEDUP_RADIUS)
                        {
                            residual = residual.max(r);
                            found.push((z, w));
                        }
                    }
                    other => {
                        let same = |u: Option<Complex64>, v: Option<Complex64>| match (u, v) {
                            (None, None) => true,
                            (Some(u), Some(v)) => chordal(u, v) < DEDUP_RADIUS,
                            _ => false,
                        };
                        if !infinite.iter().any(|e| same(e.0, other.0) && same(e.1, other.1)) {
                            infinite.push(other);
                        }
                    }
                }
            }
        }
    }
    let coords = found.iter().flat_map(|&(z, w)| [z, w]).collect();
    Ok(ZeroSet {
        dim: 2,
        coords,
        residual,
        at_infinity: infinite.len(),
        degree_expected: expected,
        dropped,
    })
}

/// Roots in `w` of `p(x, ·)`; roots at `w = ∞` appear as non-finite values.
/// `None` when `p(x, ·)` vanishes identically.
fn roots_in_w(p: &BivariatePoly, x: Complex64) -> Option<Vec<Complex64>> {
    let coeffs = p.coefficients_in_w(x);
    let scale: f64 =
        p.coefficients().iter().map(|c| c.norm()).sum::<f64>() * (1.0 + x.norm()).powi(p.degree_z() as i32);
    if coeffs.iter().all(|c| c.norm() <= 1e-13 * scale) {
        return None;
    }
    let zs = roots_univariate(&coeffs).ok()?;
    let mut out: Vec<Complex64> = zs.points().map(|w| w[0]).collect();
    out.extend(std::iter::repeat_n(Complex64::new(f64::INFINITY, 0.0), zs.at_infinity));
    Some(out)
}
