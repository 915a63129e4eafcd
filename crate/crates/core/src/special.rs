//! Special functions and numerical constants shared across the crate.

use std::f64::consts::PI;

use statrs::function::{erf, factorial, gamma};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// ζ(2) = π²/6.
pub const ZETA_2: f64 = PI * PI / 6.0;
/// Apéry's constant ζ(3).
pub const ZETA_3: f64 = 1.202_056_903_159_594_3;

/// Natural log of `n!`.
pub fn ln_factorial(n: u64) -> f64 {
    factorial::ln_factorial(n)
}

/// Natural log of the binomial coefficient `C(n, k)`; `-inf` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    factorial::ln_binomial(n, k)
}

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Dilogarithm `Li₂(x) = Σ_{k≥1} x^k / k²` for `x ∈ [-1, 1]`.
///
/// Direct series for `|x| ≤ 1/2`, Euler reflection above, Landen below.
pub fn dilog(x: f64) -> f64 {
    assert!((-1.0..=1.0).contains(&x), "dilog argument {x} outside [-1, 1]");
    if x == 1.0 {
        return ZETA_2;
    }
    if x > 0.5 {
        return ZETA_2 - x.ln() * (-x).ln_1p() - dilog_series(1.0 - x);
    }
    if x < -0.5 {
        // Landen: Li₂(x) = -Li₂(x/(x-1)) - ½ ln²(1-x)
        let l = (-x).ln_1p();
        return -dilog_series(x / (x - 1.0)) - 0.5 * l * l;
    }
    dilog_series(x)
}

fn dilog_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = x;
    for k in 1..200u32 {
        let term = pow / (f64::from(k) * f64::from(k));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
        pow *= x;
    }
    sum
}

/// Truncated dilogarithm `Σ_{k=1}^{n} x^k / k²`.
pub fn dilog_truncated(x: f64, n: u32) -> f64 {
    let mut sum = 0.0;
    let mut pow = 1.0;
    for k in 1..=n {
        pow *= x;
        if pow == 0.0 {
            break;
        }
        sum += pow / (f64::from(k) * f64::from(k));
    }
    sum
}

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess followed by Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = mid - half * x;
        nodes[n - 1 - i] = mid + half * x;
        weights[i] = half * w;
        weights[n - 1 - i] = half * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
