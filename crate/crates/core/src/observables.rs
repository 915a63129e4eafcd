//! Test functions `φ` and counting regions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::ModelKind;
use crate::quadrature::PolarGrid;
use crate::solver::ZeroSet;

/// Slack for boundary-grazing points, which count as inside.
pub const BOUNDARY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("cannot parse '{0}'")]
    Parse(String),
    #[error("invalid parameters: {0}")]
    Invalid(String),
}

/// Radial test functions `φ(z) = f(|z − c|²)`; on the product model the
/// tensor product `φ(z_1) φ(z_2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TestFunction {
    /// `exp(−|z−c|²/s²)`.
    GaussBump { center: Complex64, scale: f64 },
    /// `(1 − |z−c|²/R²)⁴` inside the disk, 0 outside.
    PolyBump4 { center: Complex64, radius: f64 },
    /// Cubic spline through `(r_i², v_i)`, zero beyond the last knot.
    UserTable {
        center: Complex64,
        radii: Vec<f64>,
        values: Vec<f64>,
    },
}

impl TestFunction {
    pub fn gauss(center: Complex64, scale: f64) -> Self {
        TestFunction::GaussBump { center, scale }
    }

    pub fn poly4(center: Complex64, radius: f64) -> Self {
        TestFunction::PolyBump4 { center, radius }
    }

    pub fn center(&self) -> Complex64 {
        match self {
            TestFunction::GaussBump { center, .. }
            | TestFunction::PolyBump4 { center, .. }
            | TestFunction::UserTable { center, .. } => *center,
        }
    }

    /// Radius beyond which `φ` and `φ_{zz̄}` are below `e^{-40}` relative.
    pub fn support_radius(&self) -> f64 {
        match self {
            TestFunction::GaussBump { scale, .. } => scale * 44f64.sqrt(),
            TestFunction::PolyBump4 { radius, .. } => *radius,
            TestFunction::UserTable { radii, .. } => *radii.last().unwrap_or(&0.0),
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        match self {
            TestFunction::GaussBump { scale, .. } if !(scale.is_finite() && *scale > 0.0) => {
                return Err(SpecError::Invalid(format!("gauss scale {scale}")))
            }
            TestFunction::PolyBump4 { radius, .. } if !(radius.is_finite() && *radius > 0.0) => {
                return Err(SpecError::Invalid(format!("poly4 radius {radius}")))
            }
            TestFunction::UserTable { radii, values, .. } => {
                if radii.len() < 3 || radii.len() != values.len() {
                    return Err(SpecError::Invalid("table needs ≥ 3 matching knots".into()));
                }
                if radii[0] != 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(SpecError::Invalid("table radii must start at 0 and increase".into()));
                }
                if values.iter().any(|v| !v.is_finite()) || values[values.len() - 1] != 0.0 {
                    return Err(SpecError::Invalid("table values must be finite and end at 0".into()));
                }
            }
            _ => {}
        }
        if !self.center().re.is_finite() || !self.center().im.is_finite() {
            return Err(SpecError::Invalid("non-finite center".into()));
        }
        // ∂∂̄φ must not vanish identically
        let r = self.support_radius();
        let peak = (0..64)
            .map(|k| {
                self.laplacian(self.center() + Complex64::new(r * k as f64 / 64.0, 0.0))
                    .abs()
            })
            .fold(0.0, f64::max);
        if !(peak > 1e-6) {
            return Err(SpecError::Invalid("∂∂̄φ vanishes".into()));
        }
        Ok(())
    }

    /// `(f(t), f'(t), f''(t))` at `t = |z − c|²`.
    fn profile(&self, t: f64) -> (f64, f64, f64) {
        match self {
            TestFunction::GaussBump { scale, .. } => {
                let s2 = scale * scale;
                let f = (-t / s2).exp();
                (f, -f / s2, f / (s2 * s2))
            }
            TestFunction::PolyBump4 { radius, .. } => {
                let r2 = radius * radius;
                if t >= r2 {
                    return (0.0, 0.0, 0.0);
                }
                let u = 1.0 - t / r2;
                (u.powi(4), -4.0 / r2 * u.powi(3), 12.0 / (r2 * r2) * u * u)
            }
            TestFunction::UserTable { radii, values, .. } => {
                let knots: Vec<f64> = radii.iter().map(|r| r * r).collect();
                spline_eval(&knots, values, &spline_second_derivatives(&knots, values), t)
            }
        }
    }

    /// `φ` at a chart point (`dim` coordinates; tensor product for `dim = 2`).
    pub fn value_at(&self, z: &[Complex64]) -> f64 {
        z.iter().map(|&c| self.value(c)).product()
    }

    pub fn value(&self, z: Complex64) -> f64 {
        self.profile((z - self.center()).norm_sqr()).0
    }

    /// `φ_{zz̄} = ¼ Δφ = f'(t) + t f''(t)`.
    pub fn laplacian(&self, z: Complex64) -> f64 {
        let t = (z - self.center()).norm_sqr();
        let (_, d1, d2) = self.profile(t);
        d1 + t * d2
    }

    /// Density `μ = (2/π) φ_{zz̄}` of `(i/π) ∂∂̄φ` against Lebesgue measure.
    pub fn mu(&self, z: Complex64) -> f64 {
        2.0 / PI * self.laplacian(z)
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::GaussBump { center, scale } => write!(f, "gauss:{}:{scale}", fmt_point(*center)),
            TestFunction::PolyBump4 { center, radius } => write!(f, "poly4:{}:{radius}", fmt_point(*center)),
            TestFunction::UserTable { center, radii, values } => {
                let knots: Vec<String> = radii.iter().zip(values).map(|(r, v)| format!("{r}={v}")).collect();
                write!(f, "table:{}:{}", fmt_point(*center), knots.join(";"))
            }
        }
    }
}

impl FromStr for TestFunction {
    type Err = SpecError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || SpecError::Parse(s.to_string());
        let tf = match parts.as_slice() {
            ["gauss", c, sc] => TestFunction::GaussBump {
                center: parse_point(c).ok_or_else(bad)?,
                scale: sc.parse().map_err(|_| bad())?,
            },
            ["poly4", c, r] => TestFunction::PolyBump4 {
                center: parse_point(c).ok_or_else(bad)?,
                radius: r.parse().map_err(|_| bad())?,
            },
            ["table", c, knots] => {
                let mut radii = Vec::new();
                let mut values = Vec::new();
                for k in knots.split(';') {
                    let (r, v) = k.split_once('=').ok_or_else(bad)?;
                    radii.push(r.trim().parse().map_err(|_| bad())?);
                    values.push(v.trim().parse().map_err(|_| bad())?);
                }
                TestFunction::UserTable {
                    center: parse_point(c).ok_or_else(bad)?,
                    radii,
                    values,
                }
            }
            _ => return Err(bad()),
        };
        tf.validate()?;
        Ok(tf)
    }
}

/// Natural cubic spline second derivatives.
fn spline_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior equations
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        let a = h0 / 6.0;
        let b = (h0 + h1) / 3.0;
        let cc = h1 / 6.0;
        let rhs = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        let denom = b - a * c[i - 1];
        c[i] = cc / denom;
        d[i] = (rhs - a * d[i - 1]) / denom;
    }
    for i in (1..n - 1).rev() {
        m[i] = d[i] - c[i] * m[i + 1];
    }
    m
}

fn spline_eval(x: &[f64], y: &[f64], m: &[f64], t: f64) -> (f64, f64, f64) {
    let n = x.len();
    if t >= x[n - 1] {
        return (0.0, 0.0, 0.0);
    }
    let i = x.partition_point(|&k| k <= t).clamp(1, n - 1) - 1;
    let h = x[i + 1] - x[i];
    let a = (x[i + 1] - t) / h;
    let b = (t - x[i]) / h;
    let f = a * y[i] + b * y[i + 1] + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0;
    let d1 = (y[i + 1] - y[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m[i] + (3.0 * b * b - 1.0) / 6.0 * h * m[i + 1];
    let d2 = a * m[i] + b * m[i + 1];
    (f, d1, d2)
}

fn parse_point(s: &str) -> Option<Complex64> {
    match s.split_once(',') {
        Some((re, im)) => Some(Complex64::new(re.trim().parse().ok()?, im.trim().parse().ok()?)),
        None => Some(Complex64::new(s.trim().parse().ok()?, 0.0)),
    }
}

fn fmt_point(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else {
        format!("{},{}", c.re, c.im)
    }
}

/// Counting regions in chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RegionSpec {
    Disk {
        center: Complex64,
        radius: f64,
    },
    Annulus {
        center: Complex64,
        inner: f64,
        outer: f64,
    },
    Square {
        center: Complex64,
        half_side: f64,
    },
    /// `D(c_1, r_1) × D(c_2, r_2)` on the product model.
    ProductDisks {
        c1: Complex64,
        r1: f64,
        c2: Complex64,
        r2: f64,
    },
}

impl RegionSpec {
    pub fn disk(center: Complex64, radius: f64) -> Self {
        RegionSpec::Disk { center, radius }
    }

    pub fn dim(&self) -> usize {
        match self {
            RegionSpec::ProductDisks { .. } => 2,
            _ => 1,
        }
    }

    pub fn validate(&self, model: ModelKind) -> Result<(), SpecError> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        let ok = match self {
            RegionSpec::Disk { radius, .. } => positive(*radius),
            RegionSpec::Annulus { inner, outer, .. } => positive(*outer) && *inner >= 0.0 && inner < outer,
            RegionSpec::Square { half_side, .. } => positive(*half_side),
            RegionSpec::ProductDisks { r1, r2, .. } => positive(*r1) && positive(*r2),
        };
        if !ok {
            return Err(SpecError::Invalid(format!("{self}")));
        }
        if self.dim() != model.dim() {
            return Err(SpecError::Invalid(format!("region {self} does not fit model {model}")));
        }
        if model == ModelKind::Hyperbolic && self.outer_radius() > 0.9 {
            return Err(SpecError::Invalid(
                "hyperbolic region must stay within |z| ≤ 0.9".into(),
            ));
        }
        Ok(())
    }

    /// Largest chart modulus reached by the region.
    pub fn outer_radius(&self) -> f64 {
        match self {
            RegionSpec::Disk { center, radius } => center.norm() + radius,
            RegionSpec::Annulus { center, outer, .. } => center.norm() + outer,
            RegionSpec::Square { center, half_side } => center.norm() + half_side * std::f64::consts::SQRT_2,
            RegionSpec::ProductDisks { c1, r1, c2, r2 } => (c1.norm() + r1).max(c2.norm() + r2),
        }
    }

    pub fn contains(&self, z: &[Complex64]) -> bool {
        let in_disk = |p: Complex64, c: Complex64, r: f64| (p - c).norm() <= r + BOUNDARY_TOL;
        match self {
            RegionSpec::Disk { center, radius } => in_disk(z[0], *center, *radius),
            RegionSpec::Annulus { center, inner, outer } => {
                let d = (z[0] - center).norm();
                d >= inner - BOUNDARY_TOL && d <= outer + BOUNDARY_TOL
            }
            RegionSpec::Square { center, half_side } => {
                let d = z[0] - center;
                d.re.abs().max(d.im.abs()) <= half_side + BOUNDARY_TOL
            }
            RegionSpec::ProductDisks { c1, r1, c2, r2 } => in_disk(z[0], *c1, *r1) && in_disk(z[1], *c2, *r2),
        }
    }

    /// Area of the one-variable region (or a factor) with respect to the
    /// model's Kähler form, by quadrature.
    fn factor_area(model: ModelKind, center: Complex64, region: impl Fn(Complex64) -> bool, reach: f64) -> f64 {
        let density = |z: Complex64| match model {
            ModelKind::Flat => 1.0,
            ModelKind::Hyperbolic => (1.0 - z.norm_sqr()).powi(-2),
            _ => (1.0 + z.norm_sqr()).powi(-2),
        };
        let grid = PolarGrid::new(center, reach, 400, 512);
        grid.integrate(|z| if region(z) { density(z) } else { 0.0 })
    }

    /// `Area_ω` of the region (product: product of the factor areas).
    pub fn kahler_area(&self, model: ModelKind) -> f64 {
        let exact_disk = |c: Complex64, r: f64| -> Option<f64> {
            (c == Complex64::new(0.0, 0.0)).then(|| match model.factor() {
                ModelKind::Flat => PI * r * r,
                ModelKind::Hyperbolic => PI * r * r / (1.0 - r * r),
                _ => PI * r * r / (1.0 + r * r),
            })
        };
        match self {
            RegionSpec::Disk { center, radius } => exact_disk(*center, *radius)
                .unwrap_or_else(|| Self::factor_area(model, *center, |z| self.contains(&[z]), *radius)),
            RegionSpec::Annulus { center, inner, outer } => {
                RegionSpec::disk(*center, *outer).kahler_area(model)
                    - RegionSpec::disk(*center, *inner).kahler_area(model)
            }
            RegionSpec::Square { center, half_side } => Self::factor_area(
                model,
                *center,
                |z| self.contains(&[z]),
                half_side * std::f64::consts::SQRT_2,
            ),
            RegionSpec::ProductDisks { c1, r1, c2, r2 } => {
                RegionSpec::disk(*c1, *r1).kahler_area(ModelKind::Elliptic)
                    * RegionSpec::disk(*c2, *r2).kahler_area(ModelKind::Elliptic)
            }
        }
    }

    /// Expected number of zeros in the region: `N·Area/π` for one section,
    /// `2N²·Area/π²` for two sections on the product model.
    pub fn expected_count(&self, model: ModelKind, degree: u32) -> f64 {
        let n = f64::from(degree);
        match model {
            ModelKind::ProductElliptic2 => 2.0 * n * n * self.kahler_area(model) / (PI * PI),
            _ => n * self.kahler_area(model) / PI,
        }
    }
}

impl fmt::Display for RegionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionSpec::Disk { center, radius } => write!(f, "disk:{}:{radius}", fmt_point(*center)),
            RegionSpec::Annulus { center, inner, outer } => {
                write!(f, "annulus:{}:{inner}:{outer}", fmt_point(*center))
            }
            RegionSpec::Square { center, half_side } => write!(f, "square:{}:{half_side}", fmt_point(*center)),
            RegionSpec::ProductDisks { c1, r1, c2, r2 } => {
                write!(f, "pdisk:{}:{r1}:{}:{r2}", fmt_point(*c1), fmt_point(*c2))
            }
        }
    }
}

impl FromStr for RegionSpec {
    type Err = SpecError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || SpecError::Parse(s.to_string());
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
        let pt = |x: &str| parse_point(x).ok_or_else(bad);
        match parts.as_slice() {
            ["disk", c, r] => Ok(RegionSpec::Disk {
                center: pt(c)?,
                radius: num(r)?,
            }),
            ["annulus", c, a, b] => Ok(RegionSpec::Annulus {
                center: pt(c)?,
                inner: num(a)?,
                outer: num(b)?,
            }),
            ["square", c, h] => Ok(RegionSpec::Square {
                center: pt(c)?,
                half_side: num(h)?,
            }),
            ["pdisk", c1, r1, c2, r2] => Ok(RegionSpec::ProductDisks {
                c1: pt(c1)?,
                r1: num(r1)?,
                c2: pt(c2)?,
                r2: num(r2)?,
            }),
            _ => Err(bad()),
        }
    }
}

/// Number of zeros inside the region; boundary-grazing points count.
pub fn count_in_region(zs: &ZeroSet, region: &RegionSpec) -> usize {
    if zs.dim != region.dim() {
        return 0;
    }
    zs.points().filter(|p| region.contains(p)).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn laplacians_match_finite_differences() {
        let fs = [
            TestFunction::gauss(Complex64::new(0.2, -0.1), 0.8),
            TestFunction::poly4(c(0.0), 1.5),
            "table:0:0=1;0.5=0.7;1=0.2;1.5=0".parse().unwrap(),
        ];
        let h = 1e-4;
        for f in &fs {
            for z in [Complex64::new(0.3, 0.45), Complex64::new(-0.5, 0.1)] {
                let lap = (f.value(z + h)
                    + f.value(z - h)
                    + f.value(z + Complex64::new(0.0, h))
                    + f.value(z - Complex64::new(0.0, h))
                    - 4.0 * f.value(z))
                    / (h * h);
                assert!(
                    (lap / 4.0 - f.laplacian(z)).abs() < 1e-5,
                    "{f} {} {}",
                    lap / 4.0,
                    f.laplacian(z)
                );
            }
        }
    }

    #[test]
    fn parse_round_trip() {
        for s in [
            "gauss:0:1",
            "poly4:0.5,-0.25:2",
            "disk:0:1",
            "annulus:0:0.5:1",
            "square:1,1:0.5",
            "pdisk:0:1:0:1",
        ] {
            if let Ok(t) = s.parse::<TestFunction>() {
                assert_eq!(t.to_string().parse::<TestFunction>().unwrap(), t);
            } else {
                let r: RegionSpec = s.parse().unwrap();
                assert_eq!(r.to_string().parse::<RegionSpec>().unwrap(), r);
            }
        }
        assert!("gauss:0:-1".parse::<TestFunction>().is_err());
        assert!("blob:0:1".parse::<RegionSpec>().is_err());
    }

    #[test]
    fn region_areas() {
        let d = RegionSpec::disk(c(0.0), 1.0);
        assert!((d.expected_count(ModelKind::Elliptic, 100) - 50.0).abs() < 1e-12);
        let off = RegionSpec::disk(c(0.5), 0.3);
        let numeric = RegionSpec::factor_area(ModelKind::Flat, c(0.5), |z| off.contains(&[z]), 0.3);
        assert!((numeric - PI * 0.09).abs() < 1e-6);
        let ann = RegionSpec::Annulus {
            center: c(0.0),
            inner: 0.5,
            outer: 1.0,
        };
        assert!((ann.kahler_area(ModelKind::Elliptic) - PI * (0.5 - 0.2)).abs() < 1e-12);
    }

    #[test]
    fn counting_includes_boundary() {
        let zs = ZeroSet::from_points(
            1,
            vec![c(1.0), c(-1.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)],
        );
        assert_eq!(count_in_region(&zs, &RegionSpec::disk(c(0.0), 1.5)), 4);
        assert_eq!(count_in_region(&zs, &RegionSpec::disk(c(0.0), 0.5)), 0);
        assert_eq!(count_in_region(&zs, &RegionSpec::disk(c(0.0), 1.0)), 4);
    }
}
