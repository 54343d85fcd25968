//! Broken L∞ and L² errors, boundary/interface L² errors and observed rates.
//!
//! Discrete fields are passed as closures `(element, reference point) ->
//! value`, so the same routines measure `u_h`, `q_h`, `u_h^⋆`, projections and
//! adjoint fields.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::basis::{edge_basis_at, AffineMap, ReferenceElement};
use crate::error::{Error, Result};
use crate::hdg_local::{hdg_project, Stabilization};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{edge_quadrature, triangle_quadrature, EdgeRule, TriangleRule};

/// Discrete scalar field evaluated on element `e` at a reference point.
pub type DiscreteScalar<'a> = dyn Fn(usize, Point) -> f64 + Sync + 'a;
/// Discrete vector field evaluated on element `e` at a reference point.
pub type DiscreteVector<'a> = dyn Fn(usize, Point) -> [f64; 2] + Sync + 'a;

/// Reference-element sample set of the L∞ estimator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingSpec {
    /// Exactness of the triangle rule whose points are sampled.
    pub exactness: usize,
    pub vertices: bool,
    /// Equispaced interior points per edge, `t = i / (m + 1)`.
    pub edge_points: usize,
}

impl SamplingSpec {
    /// Quadrature points of a degree `2k+3` rule, the vertices and 4 interior
    /// points per edge.
    pub fn standard(k: usize) -> Self {
        SamplingSpec { exactness: 2 * k + 3, vertices: true, edge_points: 4 }
    }

    pub fn points(&self) -> Result<Vec<Point>> {
        let mut pts = triangle_quadrature(self.exactness)?.points;
        let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        if self.vertices {
            pts.extend_from_slice(&corners);
        }
        for e in 0..3 {
            let (a, b) = (corners[e], corners[(e + 1) % 3]);
            for i in 1..=self.edge_points {
                let t = i as f64 / (self.edge_points + 1) as f64;
                pts.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        Ok(pts)
    }
}

fn sq(x: f64) -> f64 {
    x * x
}

fn max_over_elements(mesh: &Mesh, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    crate::par::map_indices(mesh.num_elements(), f).into_iter().fold(0.0, f64::max)
}

fn sum_over_elements(mesh: &Mesh, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    crate::par::map_indices(mesh.num_elements(), f).into_iter().sum()
}

/// `max |exact − discrete|` over the sample set of every element.
pub fn linf_error(
    mesh: &Mesh,
    sampling: &SamplingSpec,
    discrete: &DiscreteScalar<'_>,
    exact: &(dyn Fn(Point) -> f64 + Sync),
) -> Result<f64> {
    let pts = sampling.points()?;
    Ok(max_over_elements(mesh, |e| {
        let map = AffineMap::new(mesh.element_vertices(e));
        pts.iter().map(|&xi| (exact(map.to_physical(xi)) - discrete(e, xi)).abs()).fold(0.0, f64::max)
    }))
}

/// Vector version of [`linf_error`], Euclidean norm pointwise.
pub fn linf_error_vector(
    mesh: &Mesh,
    sampling: &SamplingSpec,
    discrete: &DiscreteVector<'_>,
    exact: &(dyn Fn(Point) -> [f64; 2] + Sync),
) -> Result<f64> {
    let pts = sampling.points()?;
    Ok(max_over_elements(mesh, |e| {
        let map = AffineMap::new(mesh.element_vertices(e));
        pts.iter()
            .map(|&xi| {
                let (a, b) = (exact(map.to_physical(xi)), discrete(e, xi));
                libm::hypot(a[0] - b[0], a[1] - b[1])
            })
            .fold(0.0, f64::max)
    }))
}

/// Broken `L²(Ω)` error by element quadrature.
pub fn l2_error(
    mesh: &Mesh,
    rule: &TriangleRule,
    discrete: &DiscreteScalar<'_>,
    exact: &(dyn Fn(Point) -> f64 + Sync),
) -> f64 {
    libm::sqrt(sum_over_elements(mesh, |e| {
        let map = AffineMap::new(mesh.element_vertices(e));
        let det = map.det.abs();
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(&xi, &w)| {
                let d = exact(map.to_physical(xi)) - discrete(e, xi);
                w * det * d * d
            })
            .sum()
    }))
}

/// Broken `L²(Ω)` error of a vector field.
pub fn l2_error_vector(
    mesh: &Mesh,
    rule: &TriangleRule,
    discrete: &DiscreteVector<'_>,
    exact: &(dyn Fn(Point) -> [f64; 2] + Sync),
) -> f64 {
    libm::sqrt(sum_over_elements(mesh, |e| {
        let map = AffineMap::new(mesh.element_vertices(e));
        let det = map.det.abs();
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(&xi, &w)| {
                let (a, b) = (exact(map.to_physical(xi)), discrete(e, xi));
                w * det * (sq(a[0] - b[0]) + sq(a[1] - b[1]))
            })
            .sum()
    }))
}

/// Squared error integrated over the given faces, each face seen from its
/// left element.
fn face_integral(
    mesh: &Mesh,
    faces: &[usize],
    rule: &EdgeRule,
    sq_error: &(dyn Fn(usize, Point, Point) -> f64 + Sync),
) -> Result<f64> {
    if faces.is_empty() {
        return Err(Error::invalid("interface face set is empty"));
    }
    let parts = crate::par::map_indices(faces.len(), |i| {
        let f = faces[i];
        let face = &mesh.faces[f];
        let e = face.left;
        let map = AffineMap::new(mesh.element_vertices(e));
        let [p0, p1] = mesh.face_endpoints(f);
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(&s, &w)| {
                let x = [p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1])];
                w * face.length * sq_error(e, map.to_reference(x), x)
            })
            .sum::<f64>()
    });
    Ok(libm::sqrt(parts.into_iter().sum()))
}

/// `L²(Γ)` error over `faces`, the discrete field taken as the trace of the
/// face's left element.
pub fn l2_error_interface(
    mesh: &Mesh,
    faces: &[usize],
    rule: &EdgeRule,
    discrete: &DiscreteScalar<'_>,
    exact: &(dyn Fn(Point) -> f64 + Sync),
) -> Result<f64> {
    face_integral(mesh, faces, rule, &|e, xi, x| sq(exact(x) - discrete(e, xi)))
}

/// Vector version of [`l2_error_interface`]; both components enter.
pub fn l2_error_interface_vector(
    mesh: &Mesh,
    faces: &[usize],
    rule: &EdgeRule,
    discrete: &DiscreteVector<'_>,
    exact: &(dyn Fn(Point) -> [f64; 2] + Sync),
) -> Result<f64> {
    face_integral(mesh, faces, rule, &|e, xi, x| {
        let (a, b) = (exact(x), discrete(e, xi));
        sq(a[0] - b[0]) + sq(a[1] - b[1])
    })
}

/// `L²` error of a face field stored as `k + 1` coefficients per face (trace
/// layout), over `faces`. `exact` receives the face index, so face-dependent
/// data such as normal derivatives can be compared.
pub fn l2_error_face_field(
    mesh: &Mesh,
    faces: &[usize],
    degree: usize,
    coeffs: &[f64],
    exact: &(dyn Fn(usize, Point) -> f64 + Sync),
) -> Result<f64> {
    let rule = edge_quadrature(2 * degree + 3)?;
    let m = degree + 1;
    if coeffs.len() != m * mesh.num_faces() {
        return Err(Error::invalid("face field has the wrong length"));
    }
    if faces.is_empty() {
        return Err(Error::invalid("interface face set is empty"));
    }
    let mut mu = vec![0.0; m];
    let mut total = 0.0;
    for &f in faces {
        let [p0, p1] = mesh.face_endpoints(f);
        let len = mesh.faces[f].length;
        let c = &coeffs[f * m..(f + 1) * m];
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            edge_basis_at(degree, s, &mut mu);
            let v: f64 = mu.iter().zip(c).map(|(a, b)| a * b).sum();
            let x = [p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1])];
            total += w * len * sq(exact(f, x) - v);
        }
    }
    Ok(libm::sqrt(total))
}

/// Elementwise-max L∞ errors `(‖Π_V q − q‖, ‖Π_W u − u‖)` of the HDG projection.
pub fn projection_linf_errors(
    mesh: &Mesh,
    reference: &ReferenceElement,
    tau: &Stabilization,
    sampling: &SamplingSpec,
    q_exact: &(dyn Fn(Point) -> [f64; 2] + Sync),
    u_exact: &(dyn Fn(Point) -> f64 + Sync),
) -> Result<(f64, f64)> {
    let pts = sampling.points()?;
    let n = reference.dim();
    let per_element = crate::par::try_map_indices(mesh.num_elements(), |e| -> Result<(f64, f64)> {
        let (qc, uc) = hdg_project(mesh, e, reference, tau, q_exact, u_exact)?;
        let map = AffineMap::new(mesh.element_vertices(e));
        let mut phi = vec![0.0; n];
        let (mut eq, mut eu) = (0.0f64, 0.0f64);
        for &xi in &pts {
            reference.basis_at(xi, &mut phi);
            let dot = |c: &[f64]| phi.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
            let x = map.to_physical(xi);
            let q = q_exact(x);
            eq = eq.max(libm::hypot(q[0] - dot(&qc[..n]), q[1] - dot(&qc[n..])));
            eu = eu.max((u_exact(x) - dot(&uc)).abs());
        }
        Ok((eq, eu))
    })?;
    Ok(per_element.into_iter().fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1))))
}

/// Observed orders `log2(e_{i−1} / e_i)` for an n-doubling sequence.
pub fn rates(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::invalid("errors must be positive to compute rates"));
    }
    Ok(errors.windows(2).map(|w| libm::log2(w[0] / w[1])).collect())
}

/// Quantities reported by the convergence studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    QLinf,
    ULinf,
    UstarLinf,
    QL2,
    UL2,
    QL2Boundary,
    UL2Boundary,
    UstarL2Boundary,
    PL2,
    ZL2,
    GL2Boundary,
}

impl Quantity {
    pub const ALL: [Quantity; 11] = [
        Quantity::QLinf,
        Quantity::ULinf,
        Quantity::UstarLinf,
        Quantity::QL2,
        Quantity::UL2,
        Quantity::QL2Boundary,
        Quantity::UL2Boundary,
        Quantity::UstarL2Boundary,
        Quantity::PL2,
        Quantity::ZL2,
        Quantity::GL2Boundary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::QLinf => "q_Linf",
            Quantity::ULinf => "u_Linf",
            Quantity::UstarLinf => "ustar_Linf",
            Quantity::QL2 => "q_L2",
            Quantity::UL2 => "u_L2",
            Quantity::QL2Boundary => "q_L2_boundary",
            Quantity::UL2Boundary => "u_L2_boundary",
            Quantity::UstarL2Boundary => "ustar_L2_boundary",
            Quantity::PL2 => "p_L2",
            Quantity::ZL2 => "z_L2",
            Quantity::GL2Boundary => "g_L2_boundary",
        }
    }

    /// Whether the quantity belongs to the control problem.
    pub fn is_control(self) -> bool {
        matches!(self, Quantity::PL2 | Quantity::ZL2 | Quantity::GL2Boundary)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| Error::invalid(alloc::format!("unknown quantity `{s}`")))
    }
}

/// Errors of one refinement level, or the code of the error that aborted it.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelRecord {
    pub n: usize,
    pub h_over_sqrt2: f64,
    /// Aligned with [`ErrorReport::quantities`]; empty when the level failed.
    pub errors: Vec<f64>,
    pub failure: Option<String>,
}

/// Per-level errors of a refinement study.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ErrorReport {
    pub quantities: Vec<Quantity>,
    pub levels: Vec<LevelRecord>,
}

impl ErrorReport {
    pub fn new(quantities: Vec<Quantity>) -> Self {
        ErrorReport { quantities, levels: Vec::new() }
    }

    pub fn push_level(&mut self, n: usize, errors: Vec<f64>) -> Result<()> {
        if errors.len() != self.quantities.len() {
            return Err(Error::invalid("one error per quantity is required"));
        }
        self.levels.push(LevelRecord { n, h_over_sqrt2: 1.0 / n as f64, errors, failure: None });
        Ok(())
    }

    pub fn push_failure(&mut self, n: usize, code: impl Into<String>) {
        self.levels.push(LevelRecord {
            n,
            h_over_sqrt2: 1.0 / n as f64,
            errors: Vec::new(),
            failure: Some(code.into()),
        });
    }

    pub fn has_failures(&self) -> bool {
        self.levels.iter().any(|l| l.failure.is_some())
    }

    fn column(&self, q: Quantity) -> Option<usize> {
        self.quantities.iter().position(|&x| x == q)
    }

    /// Error of `q` at level `i`, `None` if absent or the level failed.
    pub fn error(&self, q: Quantity, i: usize) -> Option<f64> {
        let c = self.column(q)?;
        self.levels.get(i)?.errors.get(c).copied()
    }

    /// Rates per level; `None` on the first level, after failures and for
    /// nonpositive errors.
    pub fn rates(&self, q: Quantity) -> Vec<Option<f64>> {
        (0..self.levels.len())
            .map(|i| {
                if i == 0 {
                    return None;
                }
                let (a, b) = (self.error(q, i - 1)?, self.error(q, i)?);
                if !(a > 0.0 && b > 0.0) {
                    return None;
                }
                let ratio = self.levels[i].n as f64 / self.levels[i - 1].n as f64;
                Some(libm::log(a / b) / libm::log(ratio))
            })
            .collect()
    }

    pub fn final_rate(&self, q: Quantity) -> Option<f64> {
        self.rates(q).last().copied().flatten()
    }

    pub fn final_error(&self, q: Quantity) -> Option<f64> {
        self.error(q, self.levels.len().checked_sub(1)?)
    }
}
