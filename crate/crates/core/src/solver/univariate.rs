use std::f64::consts::PI;

use num_complex::Complex64;

use super::{SolverError, ZeroSet};

const MAX_ITER: usize = 200;
const TOL: f64 = 1e-13;
const TRIM: f64 = 1e-13;
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// `(p(z), p'(z), Σ|c_k||z|^k)` by Horner.
pub fn eval_with_derivative(c: &[Complex64], z: Complex64) -> (Complex64, Complex64, f64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    let mut bound = 0.0;
    let az = z.norm();
    for a in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
        bound = bound * az + a.norm();
    }
    (p, dp, bound)
}

/// Newton correction `p/p'` and the relative backward error `|p|/Σ|c||z|^k`,
/// evaluated on the reversed polynomial outside the unit disk.
fn newton_ratio(c: &[Complex64], rev: &[Complex64], z: Complex64) -> (Complex64, f64) {
    let d = (c.len() - 1) as f64;
    if z.norm() <= 1.0 {
        let (p, dp, b) = eval_with_derivative(c, z);
        (p / dp, p.norm() / b)
    } else {
        let w = z.inv();
        let (q, dq, b) = eval_with_derivative(rev, w);
        // p'/p = w (d − w q'/q)
        let logder = w * (d - w * dq / q);
        (logder.inv(), q.norm() / b)
    }
}

/// Initial guesses on the circles given by the upper Newton polygon of
/// `(k, log|c_k|)`, golden-angle phases.
fn initial_guesses(c: &[Complex64]) -> Vec<Complex64> {
    let d = c.len() - 1;
    let logs: Vec<f64> = c
        .iter()
        .map(|a| {
            if a.norm() > 0.0 {
                a.norm().ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let mut hull: Vec<usize> = Vec::new();
    for k in 0..=d {
        if logs[k] == f64::NEG_INFINITY {
            continue;
        }
        while hull.len() >= 2 {
            let (i, j) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (j - i) as f64 * (logs[k] - logs[i]) - (k - i) as f64 * (logs[j] - logs[i]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    let mut out = Vec::with_capacity(d);
    for pair in hull.windows(2) {
        let (i, j) = (pair[0], pair[1]);
        let radius = ((logs[i] - logs[j]) / (j - i) as f64).exp();
        for _ in i..j {
            let theta = GOLDEN_ANGLE * out.len() as f64 + 0.25 * PI;
            out.push(Complex64::from_polar(radius, theta));
        }
    }
    out
}

/// All roots of `Σ c_k z^k`. Top coefficients below `1e-13` of the largest
/// are treated as zero and their roots reported as lying at infinity.
pub fn roots_univariate(coeffs: &[Complex64]) -> Result<ZeroSet, SolverError> {
    roots_univariate_scaled(coeffs, &vec![0.0; coeffs.len()])
}

/// Roots of `Σ c_k e^{s_k} z^k`. The trimming test is applied to the raw
/// `c_k`, so a basis whose norms `e^{s_k}` span many decades does not
/// push legitimate roots to infinity.
pub fn roots_univariate_scaled(raw: &[Complex64], log_scale: &[f64]) -> Result<ZeroSet, SolverError> {
    assert_eq!(raw.len(), log_scale.len());
    let scale = raw.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if !(scale > 1e-300) {
        return Err(SolverError::DegenerateAllZero);
    }
    let nominal = raw.len() - 1;
    let mut top = nominal;
    while raw[top].norm() < TRIM * scale {
        top -= 1;
    }
    let at_infinity = nominal - top;
    let mut low = 0;
    while raw[low].norm() == 0.0 {
        low += 1;
    }
    let d = top - low;
    let mut roots = vec![Complex64::new(0.0, 0.0); low];
    if d == 0 {
        return Ok(finish(roots, 0.0, at_infinity, nominal));
    }
    // solve in u = z/R with R balancing the end coefficients; a long
    // truncated series would otherwise underflow at one end
    let logc = |k: usize| (raw[k].norm() / scale).ln() + log_scale[k];
    let log_r = (logc(low) - logc(top)) / d as f64;
    let shifted: Vec<f64> = (low..=top).map(|k| logc(k) + (k - low) as f64 * log_r).collect();
    let smax = shifted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let c: Vec<Complex64> = raw[low..=top]
        .iter()
        .zip(&shifted)
        .map(|(a, s)| {
            if a.norm() > 0.0 {
                a / a.norm() * (s - smax).exp()
            } else {
                *a
            }
        })
        .collect();
    let radius = log_r.exp();
    let rev: Vec<Complex64> = c.iter().rev().copied().collect();
    let mut z = initial_guesses(&c);
    let mut done = vec![false; d];
    for _ in 0..MAX_ITER {
        let mut active = 0;
        for i in 0..d {
            if done[i] {
                continue;
            }
            active += 1;
            let (ratio, backward) = newton_ratio(&c, &rev, z[i]);
            if backward <= 4.0 * f64::EPSILON * (d as f64) {
                done[i] = true;
                continue;
            }
            let mut sum = Complex64::new(0.0, 0.0);
            for (j, zj) in z.iter().enumerate() {
                if j != i {
                    sum += (z[i] - zj).inv();
                }
            }
            let step = ratio / (1.0 - ratio * sum);
            if !(step.re.is_finite() && step.im.is_finite()) {
                done[i] = true;
                continue;
            }
            z[i] -= step;
            if step.norm() <= TOL * z[i].norm().max(f64::MIN_POSITIVE) {
                done[i] = true;
            }
        }
        if active == 0 {
            break;
        }
    }
    let mut residual: f64 = 0.0;
    for zi in z.iter_mut() {
        let (ratio, before) = newton_ratio(&c, &rev, *zi);
        let candidate = *zi - ratio;
        let (_, after) = newton_ratio(&c, &rev, candidate);
        let r = if after < before {
            *zi = candidate;
            after
        } else {
            before
        };
        residual = residual.max(r);
    }
    roots.extend(z.into_iter().map(|u| u * radius));
    Ok(finish(roots, residual, at_infinity, nominal))
}

fn finish(roots: Vec<Complex64>, residual: f64, at_infinity: usize, nominal: usize) -> ZeroSet {
    ZeroSet {
        dim: 1,
        coords: roots,
        residual,
        at_infinity,
        degree_expected: nominal,
        dropped: 0,
    }
}
