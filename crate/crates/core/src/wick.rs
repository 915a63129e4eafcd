//! Exact Wick calculus: Wick monomials of `|ξ|²`, chaos coefficients of
//! `log|ξ|`, Feynman diagram enumeration and valuation, and the directed
//! multigraphs that organise diagram connectivity.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaussian::{isserlis_moment, GaussianError};
use crate::special::EULER_GAMMA;

/// Highest Wick order with exact integer coefficients.
pub const WICK_MAX_ORDER: u32 = 30;
/// Largest per-side slot count accepted by diagram enumeration.
pub const DIAGRAM_MAX_SLOTS: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WickError {
    #[error("Wick order {0} exceeds the exact-arithmetic limit {WICK_MAX_ORDER}")]
    Overflow(u32),
    #[error("total slot count {0} exceeds the enumeration limit {DIAGRAM_MAX_SLOTS}")]
    TooLarge(u32),
    #[error("matrix is {got}x{got}, diagram has {expected} vertex groups")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("graphs live on {0} and {1} vertices")]
    VertexSetMismatch(usize, usize),
    #[error("invalid diagram: {0}")]
    InvalidDiagram(String),
    #[error("diagram sum has imaginary part {0:e}")]
    NonReal(f64),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
}

/// `:|ξ|^{2α}: = Σ_k c_k |ξ|^{2k}` with exact integer coefficients
/// `c_k = α!/k! · C(α,k) · (-1)^{k+α}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WickPolynomial {
    alpha: u32,
    coefficients: Vec<i128>,
}

impl WickPolynomial {
    pub fn new(alpha: u32) -> Result<Self, WickError> {
        if alpha > WICK_MAX_ORDER {
            return Err(WickError::Overflow(alpha));
        }
        let a = i128::from(alpha);
        let mut coefficients = Vec::with_capacity(alpha as usize + 1);
        for k in 0..=a {
            let falling: i128 = ((k + 1)..=a).product();
            let binom = binomial_i128(a, k);
            let sign = if (k + a) % 2 == 0 { 1 } else { -1 };
            let c = falling.checked_mul(binom).ok_or(WickError::Overflow(alpha))?;
            coefficients.push(sign * c);
        }
        Ok(Self { alpha, coefficients })
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    /// Exact coefficients, index `k` multiplying `|ξ|^{2k}`.
    pub fn coefficients(&self) -> &[i128] {
        &self.coefficients
    }

    pub fn coefficients_f64(&self) -> Vec<f64> {
        self.coefficients.iter().map(|&c| c as f64).collect()
    }

    /// Horner evaluation at `x = |ξ|²`. Cancellation grows quickly with α;
    /// see [`crate::chaos`] for the recurrence used in bulk evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c as f64)
    }
}

fn binomial_i128(n: i128, k: i128) -> i128 {
    let k = k.min(n - k);
    (0..k).fold(1i128, |acc, i| acc * (n - i) / (i + 1))
}

pub fn wick_polynomial(alpha: u32) -> Result<WickPolynomial, WickError> {
    WickPolynomial::new(alpha)
}

/// Coefficient `c_{2α}` in `log|ξ| = Σ c_{2α}/α! :|ξ|^{2α}:`.
pub fn chaos_coefficient(alpha: u32) -> f64 {
    if alpha == 0 {
        -EULER_GAMMA / 2.0
    } else {
        let sign = if alpha % 2 == 1 { 1.0 } else { -1.0 };
        sign / (2.0 * f64::from(alpha))
    }
}

/// One of the α_i holomorphic (or anti-holomorphic) copies of vertex `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub vertex: usize,
    pub copy: u32,
}

/// A labelled pairing of every `i`-slot with a `j̄`-slot, `i ≠ j`.
///
/// `targets[k]` is the partner of the `k`-th source slot, sources being
/// listed vertex-major (`(0,0), (0,1), …, (1,0), …`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeynmanDiagram {
    alphas: Vec<u32>,
    targets: Vec<Slot>,
}

impl FeynmanDiagram {
    /// The empty diagram on `p` vertex groups.
    pub fn empty(p: usize) -> Self {
        Self {
            alphas: vec![0; p],
            targets: Vec::new(),
        }
    }

    /// Build a diagram from vertex-level edges `(i, j)`, one per `i`–`j̄`
    /// pairing. Copies are assigned in order of appearance.
    pub fn from_edges(alphas: &[u32], edges: &[(usize, usize)]) -> Result<Self, WickError> {
        let p = alphas.len();
        let mut out_used = vec![0u32; p];
        let mut in_used = vec![0u32; p];
        let mut by_source: Vec<Vec<Slot>> = vec![Vec::new(); p];
        for &(i, j) in edges {
            if i >= p || j >= p {
                return Err(WickError::InvalidDiagram(format!("edge ({i},{j}) out of range")));
            }
            if i == j {
                return Err(WickError::InvalidDiagram(format!("diagonal edge ({i},{i})")));
            }
            if out_used[i] >= alphas[i] || in_used[j] >= alphas[j] {
                return Err(WickError::InvalidDiagram(format!(
                    "vertex degree exceeded at ({i},{j})"
                )));
            }
            by_source[i].push(Slot {
                vertex: j,
                copy: in_used[j],
            });
            out_used[i] += 1;
            in_used[j] += 1;
        }
        if out_used != alphas || in_used != alphas {
            return Err(WickError::InvalidDiagram("incomplete matching".into()));
        }
        Ok(Self {
            alphas: alphas.to_vec(),
            targets: by_source.into_iter().flatten().collect(),
        })
    }

    pub fn alphas(&self) -> &[u32] {
        &self.alphas
    }

    pub fn vertex_count(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Source slots in canonical order.
    pub fn sources(&self) -> impl Iterator<Item = Slot> + '_ {
        self.alphas
            .iter()
            .enumerate()
            .flat_map(|(vertex, &a)| (0..a).map(move |copy| Slot { vertex, copy }))
    }

    /// Slot-level pairings `(i-slot, j̄-slot)`.
    pub fn pairings(&self) -> impl Iterator<Item = (Slot, Slot)> + '_ {
        self.sources().zip(self.targets.iter().copied())
    }

    /// Vertex-level directed edges `(i, j)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairings().map(|(s, t)| (s.vertex, t.vertex))
    }

    /// The sub-diagram on `vertices` (sorted ascending), relabelled to
    /// `0..vertices.len()`. Every edge touching `vertices` must stay inside.
    pub fn restrict(&self, vertices: &[usize]) -> Result<Self, WickError> {
        let relabel = |v: usize| vertices.iter().position(|&u| u == v);
        let alphas: Vec<u32> = vertices.iter().map(|&v| self.alphas[v]).collect();
        let mut edges = Vec::new();
        for (i, j) in self.edges() {
            match (relabel(i), relabel(j)) {
                (Some(a), Some(b)) => edges.push((a, b)),
                (None, None) => {}
                _ => {
                    return Err(WickError::InvalidDiagram(format!(
                        "edge ({i},{j}) crosses the vertex subset"
                    )))
                }
            }
        }
        Self::from_edges(&alphas, &edges)
    }
}

/// All diagrams of `Γ(α_1, …, α_p)` in lexicographic order of their target
/// sequences. `Γ(0, …, 0)` is the singleton empty diagram.
pub fn enumerate_diagrams(alphas: &[u32]) -> Result<Vec<FeynmanDiagram>, WickError> {
    let total: u32 = alphas.iter().sum();
    if total > DIAGRAM_MAX_SLOTS {
        return Err(WickError::TooLarge(total));
    }
    let sources: Vec<usize> = alphas
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| std::iter::repeat_n(i, a as usize))
        .collect();
    let targets: Vec<Slot> = alphas
        .iter()
        .enumerate()
        .flat_map(|(vertex, &a)| (0..a).map(move |copy| Slot { vertex, copy }))
        .collect();
    let mut out = Vec::new();
    let mut used = vec![false; targets.len()];
    let mut current = Vec::with_capacity(targets.len());
    extend_matching(&sources, &targets, &mut used, &mut current, &mut |t| {
        out.push(FeynmanDiagram {
            alphas: alphas.to_vec(),
            targets: t.to_vec(),
        })
    });
    Ok(out)
}

fn extend_matching(
    sources: &[usize],
    targets: &[Slot],
    used: &mut [bool],
    current: &mut Vec<Slot>,
    emit: &mut dyn FnMut(&[Slot]),
) {
    let depth = current.len();
    if depth == sources.len() {
        emit(current);
        return;
    }
    for k in 0..targets.len() {
        if used[k] || targets[k].vertex == sources[depth] {
            continue;
        }
        used[k] = true;
        current.push(targets[k]);
        extend_matching(sources, targets, used, current, emit);
        current.pop();
        used[k] = false;
    }
}

fn check_dimension(d: &FeynmanDiagram, rho: &DMatrix<Complex64>) -> Result<(), WickError> {
    if rho.nrows() != d.vertex_count() || rho.ncols() != d.vertex_count() {
        return Err(WickError::DimensionMismatch {
            expected: d.vertex_count(),
            got: rho.nrows(),
        });
    }
    Ok(())
}

/// `∏_{(i,j)} ρ_{ij}` over the diagram's edges; 1 for the empty diagram.
pub fn diagram_value(d: &FeynmanDiagram, rho: &DMatrix<Complex64>) -> Result<Complex64, WickError> {
    check_dimension(d, rho)?;
    Ok(d.edges()
        .fold(Complex64::new(1.0, 0.0), |acc, (i, j)| acc * rho[(i, j)]))
}

/// `E[∏ :|ξ_i|^{2α_i}:]` as the sum of diagram values over `Γ(α)`.
pub fn wick_moment(alphas: &[u32], rho: &DMatrix<Complex64>) -> Result<f64, WickError> {
    if rho.nrows() != alphas.len() || rho.ncols() != alphas.len() {
        return Err(WickError::DimensionMismatch {
            expected: alphas.len(),
            got: rho.nrows(),
        });
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for d in enumerate_diagrams(alphas)? {
        let v = diagram_value(&d, rho)?;
        scale += v.norm();
        sum += v;
    }
    if sum.im.abs() > 1e-10 * scale.max(1.0) {
        return Err(WickError::NonReal(sum.im));
    }
    Ok(sum.re)
}

/// Independent route to [`wick_moment`]: expand every Wick monomial into
/// powers of `|ξ_i|²` and evaluate each mixed moment by Isserlis brute force.
pub fn wick_moment_by_isserlis(alphas: &[u32], rho: &DMatrix<Complex64>) -> Result<f64, WickError> {
    let polys = alphas
        .iter()
        .map(|&a| WickPolynomial::new(a))
        .collect::<Result<Vec<_>, _>>()?;
    let p = alphas.len();
    let mut ks = vec![0u32; p];
    let mut total = Complex64::new(0.0, 0.0);
    loop {
        let coeff: f64 = ks
            .iter()
            .zip(&polys)
            .map(|(&k, poly)| poly.coefficients()[k as usize] as f64)
            .product();
        total += coeff * isserlis_moment(&ks, &ks, rho)?;
        // odometer over k_i ∈ 0..=α_i
        let mut idx = 0;
        loop {
            if idx == p {
                return Ok(total.re);
            }
            if ks[idx] < alphas[idx] {
                ks[idx] += 1;
                break;
            }
            ks[idx] = 0;
            idx += 1;
        }
    }
}

/// Vertex set `{0, …, p-1}` with a multiset of directed edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectedMultigraph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
}

impl DirectedMultigraph {
    pub fn new(vertex_count: usize, edges: Vec<(usize, usize)>) -> Self {
        Self { vertex_count, edges }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.0 == v).count()
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.1 == v).count()
    }

    /// Edge multiplicity of `(i, j)`.
    pub fn multiplicity(&self, i: usize, j: usize) -> usize {
        self.edges.iter().filter(|&&e| e == (i, j)).count()
    }

    /// Undirected connected components, each sorted, ordered by least vertex.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.vertex_count).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut root_slot = vec![usize::MAX; self.vertex_count];
        for v in 0..self.vertex_count {
            let r = find(&mut parent, v);
            if root_slot[r] == usize::MAX {
                root_slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[root_slot[r]].push(v);
        }
        groups
    }
}

/// The associated directed multigraph `γ*`.
pub fn to_multigraph(d: &FeynmanDiagram) -> DirectedMultigraph {
    DirectedMultigraph::new(d.vertex_count(), d.edges().collect())
}

/// Superimpose graphs on a common vertex set.
pub fn combine(graphs: &[DirectedMultigraph]) -> Result<DirectedMultigraph, WickError> {
    let Some(first) = graphs.first() else {
        return Ok(DirectedMultigraph::new(0, Vec::new()));
    };
    let mut edges = Vec::new();
    for g in graphs {
        if g.vertex_count != first.vertex_count {
            return Err(WickError::VertexSetMismatch(first.vertex_count, g.vertex_count));
        }
        edges.extend_from_slice(&g.edges);
    }
    Ok(DirectedMultigraph::new(first.vertex_count, edges))
}

pub fn connected_components(g: &DirectedMultigraph) -> Vec<Vec<usize>> {
    g.connected_components()
}

fn restrict_matrix(rho: &DMatrix<Complex64>, vertices: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(vertices.len(), vertices.len(), |a, b| rho[(vertices[a], vertices[b])])
}

/// Check that the value of `d` equals the product of the values of its
/// restrictions to the connected components of `γ*`.
pub fn value_factorization_check(d: &FeynmanDiagram, rho: &DMatrix<Complex64>) -> bool {
    let Ok(full) = diagram_value(d, rho) else {
        return false;
    };
    let mut product = Complex64::new(1.0, 0.0);
    for component in to_multigraph(d).connected_components() {
        let Ok(sub) = d.restrict(&component) else {
            return false;
        };
        match diagram_value(&sub, &restrict_matrix(rho, &component)) {
            Ok(v) => product *= v,
            Err(_) => return false,
        }
    }
    (full - product).norm() <= 1e-12 * full.norm().max(1.0)
}

/// `(p)!! = p (p-2) (p-4) …`, with `(-1)!! = 0!! = 1`.
pub fn double_factorial(p: i64) -> u128 {
    let mut acc: u128 = 1;
    let mut k = p;
    while k > 1 {
        acc *= k as u128;
        k -= 2;
    }
    acc
}

/// Number of ways to split `{1, …, 2L}` into `L` unordered pairs, computed
/// as `(1/L!) ∏_{t=1}^{L} C(2t, 2)`.
pub fn pair_partition_count(l: u32) -> u128 {
    let mut num: u128 = 1;
    for t in 1..=u128::from(l) {
        num *= t * (2 * t - 1);
    }
    let fact: u128 = (1..=u128::from(l)).product();
    num / fact
}

/// `E[X^p]` for `X ~ N_R(0,1)`.
pub fn gaussian_moment(p: u32) -> u128 {
    if p % 2 == 1 {
        0
    } else {
        double_factorial(i64::from(p) - 1)
    }
}

/// Distinct vertex-level edge multisets among a set of diagrams.
pub fn distinct_edge_multisets(diagrams: &[FeynmanDiagram]) -> usize {
    diagrams
        .iter()
        .map(|d| {
            let mut e: Vec<_> = d.edges().collect();
            e.sort_unstable();
            e
        })
        .collect::<BTreeSet<_>>()
        .len()
}
