//! `P^k` bases on the reference triangle and the reference edge, plus the
//! affine map onto physical triangles.
//!
//! The triangle basis is the monomial basis ordered by total degree and
//! orthonormalized in `L²(T̂)` (two passes of modified Gram–Schmidt under an
//! exact rule). Because the ordering is by degree, the first
//! `dim P^ℓ` functions span `P^ℓ` for every `ℓ <= k`. The edge basis is the
//! shifted orthonormal Legendre family on `[0,1]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::mesh::Point;
use crate::quadrature::{edge_quadrature, triangle_quadrature, EdgeRule, TriangleRule};

/// Highest polynomial degree supported by [`ReferenceElement`].
pub const MAX_DEGREE: usize = 8;

pub const fn triangle_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

#[derive(Clone, Debug)]
pub struct ReferenceElement {
    degree: usize,
    /// Exponents `(a, b)` of `x^a y^b`, ordered by total degree.
    monomials: Vec<(u32, u32)>,
    /// Row `i` holds the monomial coefficients of basis function `i`.
    coeffs: Vec<f64>,
    tri_rule: TriangleRule,
    edge_rule: EdgeRule,
    /// `values[q * dim + i]` = `φ_i` at quadrature point `q`.
    values: Vec<f64>,
    /// Reference gradients at quadrature points, same layout.
    grads: Vec<[f64; 2]>,
    /// `edge_values[q * (k+1) + m]` = `μ_m` at edge quadrature point `q`.
    edge_values: Vec<f64>,
}

impl ReferenceElement {
    /// Degree-`k` element with quadrature exactness `2k + 3`.
    pub fn new(k: usize) -> Result<Self> {
        Self::with_quadrature(k, 2 * k + 3)
    }

    pub fn with_quadrature(k: usize, exactness: usize) -> Result<Self> {
        if k > MAX_DEGREE {
            return Err(Error::invalid(alloc::format!("degree {k} above supported {MAX_DEGREE}")));
        }
        if exactness < 2 * k {
            return Err(Error::invalid("quadrature must integrate products of basis functions"));
        }
        let tri_rule = triangle_quadrature(exactness)?;
        let edge_rule = edge_quadrature(exactness)?;
        let monomials: Vec<(u32, u32)> = (0..=k as u32)
            .flat_map(|d| (0..=d).map(move |b| (d - b, b)))
            .collect();
        let dim = monomials.len();

        // Orthonormalize with an exact rule of degree 2k.
        let gs_rule = triangle_quadrature(2 * k)?;
        let table: Vec<Vec<f64>> = monomials
            .iter()
            .map(|&(a, b)| gs_rule.points.iter().map(|p| ipow(p[0], a) * ipow(p[1], b)).collect())
            .collect();
        let inner = |u: &[f64], v: &[f64]| -> f64 {
            gs_rule.weights.iter().zip(u.iter().zip(v)).map(|(w, (x, y))| w * x * y).sum()
        };
        // Basis functions as monomial coefficient rows and their sampled values.
        let mut coeffs = vec![0.0; dim * dim];
        let mut samples: Vec<Vec<f64>> = Vec::with_capacity(dim);
        for i in 0..dim {
            let mut c = vec![0.0; dim];
            c[i] = 1.0;
            let mut s = table[i].clone();
            for _pass in 0..2 {
                for j in 0..i {
                    let proj = inner(&s, &samples[j]);
                    for (sv, tv) in s.iter_mut().zip(&samples[j]) {
                        *sv -= proj * tv;
                    }
                    for m in 0..dim {
                        c[m] -= proj * coeffs[j * dim + m];
                    }
                }
            }
            let norm = libm::sqrt(inner(&s, &s));
            if !(norm > 1e-12) {
                return Err(Error::invalid("monomial Gram–Schmidt broke down"));
            }
            s.iter_mut().for_each(|v| *v /= norm);
            c.iter_mut().for_each(|v| *v /= norm);
            coeffs[i * dim..(i + 1) * dim].copy_from_slice(&c);
            samples.push(s);
        }

        let mut element = ReferenceElement {
            degree: k,
            monomials,
            coeffs,
            tri_rule,
            edge_rule,
            values: Vec::new(),
            grads: Vec::new(),
            edge_values: Vec::new(),
        };
        let npts = element.tri_rule.len();
        let mut values = vec![0.0; npts * dim];
        let mut grads = vec![[0.0; 2]; npts * dim];
        for (q, &p) in element.tri_rule.points.iter().enumerate() {
            element.basis_at(p, &mut values[q * dim..(q + 1) * dim]);
            element.grad_at(p, &mut grads[q * dim..(q + 1) * dim]);
        }
        let ne = k + 1;
        let mut edge_values = vec![0.0; element.edge_rule.points.len() * ne];
        for (q, &s) in element.edge_rule.points.iter().enumerate() {
            edge_basis_at(k, s, &mut edge_values[q * ne..(q + 1) * ne]);
        }
        element.values = values;
        element.grads = grads;
        element.edge_values = edge_values;
        Ok(element)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `dim P^k(T̂)`.
    pub fn dim(&self) -> usize {
        self.monomials.len()
    }

    /// `dim P^k(F)`.
    pub fn edge_dim(&self) -> usize {
        self.degree + 1
    }

    pub fn triangle_rule(&self) -> &TriangleRule {
        &self.tri_rule
    }

    pub fn edge_rule(&self) -> &EdgeRule {
        &self.edge_rule
    }

    /// Basis values at triangle quadrature point `q`.
    #[inline]
    pub fn values_at_qp(&self, q: usize) -> &[f64] {
        let d = self.dim();
        &self.values[q * d..(q + 1) * d]
    }

    /// Reference gradients at triangle quadrature point `q`.
    #[inline]
    pub fn grads_at_qp(&self, q: usize) -> &[[f64; 2]] {
        let d = self.dim();
        &self.grads[q * d..(q + 1) * d]
    }

    /// Edge basis values at edge quadrature point `q`.
    #[inline]
    pub fn edge_values_at_qp(&self, q: usize) -> &[f64] {
        let d = self.edge_dim();
        &self.edge_values[q * d..(q + 1) * d]
    }

    /// All triangle basis values at `xi`; `out.len() == dim`.
    pub fn basis_at(&self, xi: Point, out: &mut [f64]) {
        let dim = self.dim();
        let mono = self.monomial_values(xi);
        for (i, o) in out.iter_mut().enumerate().take(dim) {
            let row = &self.coeffs[i * dim..(i + 1) * dim];
            *o = row.iter().zip(&mono).map(|(c, m)| c * m).sum();
        }
    }

    /// All reference gradients at `xi`.
    pub fn grad_at(&self, xi: Point, out: &mut [[f64; 2]]) {
        let dim = self.dim();
        let (dx, dy) = self.monomial_grads(xi);
        for (i, o) in out.iter_mut().enumerate().take(dim) {
            let row = &self.coeffs[i * dim..(i + 1) * dim];
            let gx = row.iter().zip(&dx).map(|(c, m)| c * m).sum();
            let gy = row.iter().zip(&dy).map(|(c, m)| c * m).sum();
            *o = [gx, gy];
        }
    }

    /// Value matrix, `points.len() × dim`.
    pub fn eval_basis(&self, points: &[Point]) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(points.len(), self.dim());
        for (r, &p) in points.iter().enumerate() {
            self.basis_at(p, m.row_mut(r));
        }
        m
    }

    /// Gradient tensor: `out[r][i]` is `∇φ_i(points[r])`.
    pub fn eval_grad_basis(&self, points: &[Point]) -> Vec<Vec<[f64; 2]>> {
        points
            .iter()
            .map(|&p| {
                let mut g = vec![[0.0; 2]; self.dim()];
                self.grad_at(p, &mut g);
                g
            })
            .collect()
    }

    /// Edge basis values at parameters `s ∈ [0,1]`, `s.len() × (k+1)`.
    pub fn eval_edge_basis(&self, s: &[f64]) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(s.len(), self.edge_dim());
        for (r, &t) in s.iter().enumerate() {
            edge_basis_at(self.degree, t, m.row_mut(r));
        }
        m
    }

    fn monomial_values(&self, xi: Point) -> Vec<f64> {
        self.monomials.iter().map(|&(a, b)| ipow(xi[0], a) * ipow(xi[1], b)).collect()
    }

    fn monomial_grads(&self, xi: Point) -> (Vec<f64>, Vec<f64>) {
        let dx = self
            .monomials
            .iter()
            .map(|&(a, b)| if a == 0 { 0.0 } else { a as f64 * ipow(xi[0], a - 1) * ipow(xi[1], b) })
            .collect();
        let dy = self
            .monomials
            .iter()
            .map(|&(a, b)| if b == 0 { 0.0 } else { b as f64 * ipow(xi[0], a) * ipow(xi[1], b - 1) })
            .collect();
        (dx, dy)
    }
}

/// Orthonormal shifted Legendre polynomials `√(2m+1) P_m(2s − 1)`, `m <= k`.
pub fn edge_basis_at(k: usize, s: f64, out: &mut [f64]) {
    let t = 2.0 * s - 1.0;
    let (mut p0, mut p1) = (1.0, t);
    for (m, o) in out.iter_mut().enumerate().take(k + 1) {
        let p = match m {
            0 => 1.0,
            1 => t,
            _ => {
                let mf = m as f64;
                let p2 = ((2.0 * mf - 1.0) * t * p1 - (mf - 1.0) * p0) / mf;
                p0 = p1;
                p1 = p2;
                p2
            }
        };
        *o = libm::sqrt(2.0 * m as f64 + 1.0) * p;
    }
}

#[inline]
fn ipow(x: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n {
        acc *= x;
    }
    acc
}

/// Affine map `x = v0 + J ξ` from the reference triangle onto a physical one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap {
    pub origin: Point,
    /// Columns are `v1 − v0` and `v2 − v0`.
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
    /// `J^{-1}`.
    pub inverse: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn new(vertices: [Point; 3]) -> Self {
        let [v0, v1, v2] = vertices;
        let j = [[v1[0] - v0[0], v2[0] - v0[0]], [v1[1] - v0[1], v2[1] - v0[1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let inverse = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
        AffineMap { origin: v0, jacobian: j, det, inverse }
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }

    #[inline]
    pub fn to_physical(&self, xi: Point) -> Point {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    #[inline]
    pub fn to_reference(&self, x: Point) -> Point {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let inv = &self.inverse;
        [inv[0][0] * d[0] + inv[0][1] * d[1], inv[1][0] * d[0] + inv[1][1] * d[1]]
    }

    /// `J^{-T} ∇̂φ`.
    #[inline]
    pub fn grad_to_physical(&self, g: [f64; 2]) -> [f64; 2] {
        let inv = &self.inverse;
        [inv[0][0] * g[0] + inv[1][0] * g[1], inv[0][1] * g[0] + inv[1][1] * g[1]]
    }
}
