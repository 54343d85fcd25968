//! Per-element HDG blocks, static condensation and the local projections.
//!
//! Unknown layout on an element with `n = dim P^k(K)` and `m = k + 1`:
//! - flux `q`: `2n` coefficients, all `x` components first, then all `y`;
//! - scalar `u`: `n` coefficients;
//! - trace `û`: `3m` coefficients, local edge by local edge, each expanded
//!   in the canonical orientation of its face.
//!
//! With `B` the HDG bilinear form restricted to `K`, the blocks are
//! `A_qq = (c q, v)`, `A_qu = −(u, ∇·v)`, `A_qû = ⟨û, v·n⟩`,
//! `A_uu = ⟨τu, w⟩`, `A_uû = ⟨τû, w⟩`, `A_ûû = ⟨τû, ŵ⟩`, and the symmetric
//! element matrix of `B` is
//!
//! ```text
//! [ A_qq    A_qu   A_qû ]
//! [ A_quᵀ  −A_uu   A_uû ]
//! [ A_qûᵀ  A_uûᵀ  −A_ûû ]
//! ```
//!
//! The discrete equations read `B(q,u,û; v,w,ŵ) = −(f, w)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{triangle_dim, AffineMap, ReferenceElement};
use crate::error::{Error, Result};
use crate::fields::Coefficient;
use crate::linalg::{DenseMatrix, LuFactors};
use crate::mesh::{Mesh, Point};

/// Stabilization parameter `τ`, one positive value per face.
#[derive(Clone, Debug, PartialEq)]
pub enum Stabilization {
    Constant(f64),
    PerFace(Vec<f64>),
}

impl Default for Stabilization {
    fn default() -> Self {
        Stabilization::Constant(1.0)
    }
}

impl Stabilization {
    #[inline]
    pub fn on_face(&self, face: usize) -> f64 {
        match self {
            Stabilization::Constant(t) => *t,
            Stabilization::PerFace(v) => v[face],
        }
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        let ok = match self {
            Stabilization::Constant(t) => *t > 0.0 && t.is_finite(),
            Stabilization::PerFace(v) => v.len() == mesh.num_faces() && v.iter().all(|t| *t > 0.0 && t.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("stabilization must be positive on every face"))
        }
    }
}

/// Quadrature data for one edge of an element.
#[derive(Clone, Debug)]
pub(crate) struct EdgeQuadrature {
    pub face: usize,
    /// Outward from the element.
    pub normal: Point,
    pub tau: f64,
    /// Element reference coordinates of the edge quadrature points, which are
    /// ordered along the canonical face orientation.
    pub ref_points: Vec<Point>,
    pub phys_points: Vec<Point>,
    /// Edge weights times face length.
    pub weights: Vec<f64>,
}

/// Geometry of one element: affine map plus quadrature on its three edges.
#[derive(Clone, Debug)]
pub(crate) struct ElementGeometry {
    pub map: AffineMap,
    pub edges: [EdgeQuadrature; 3],
}

impl ElementGeometry {
    pub fn new(mesh: &Mesh, reference: &ReferenceElement, e: usize, tau: &Stabilization) -> Result<Self> {
        let map = AffineMap::new(mesh.element_vertices(e));
        if map.area() < 1e-14 {
            return Err(Error::DegenerateElement { element: e });
        }
        let rule = reference.edge_rule();
        let edges = core::array::from_fn(|le| {
            let ef = mesh.element_faces[e][le];
            let face = &mesh.faces[ef.face];
            let [p0, p1] = mesh.face_endpoints(ef.face);
            let phys_points: Vec<Point> = rule
                .points
                .iter()
                .map(|&s| [p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1])])
                .collect();
            EdgeQuadrature {
                face: ef.face,
                normal: [ef.sign() * face.normal[0], ef.sign() * face.normal[1]],
                tau: tau.on_face(ef.face),
                ref_points: phys_points.iter().map(|&x| map.to_reference(x)).collect(),
                phys_points,
                weights: rule.weights.iter().map(|w| w * face.length).collect(),
            }
        });
        Ok(ElementGeometry { map, edges })
    }

    /// Physical quadrature points and weights (`w_q |det J|`) of the element.
    pub fn volume_points<'a>(&'a self, reference: &'a ReferenceElement) -> impl Iterator<Item = (usize, Point, f64)> + 'a {
        let rule = reference.triangle_rule();
        let det = self.map.det.abs();
        let map = self.map;
        rule.points
            .iter()
            .zip(rule.weights.iter())
            .enumerate()
            .map(move |(q, (&p, &w))| (q, map.to_physical(p), w * det))
    }
}

/// Per-element dense blocks of the HDG bilinear form.
#[derive(Clone, Debug)]
pub struct LocalOperators {
    pub element: usize,
    pub faces: [usize; 3],
    pub a_qq: DenseMatrix,
    pub a_qu: DenseMatrix,
    pub a_qhat: DenseMatrix,
    pub a_uu: DenseMatrix,
    pub a_uhat: DenseMatrix,
    pub a_hathat: DenseMatrix,
}

impl LocalOperators {
    pub fn scalar_dim(&self) -> usize {
        self.a_uu.rows()
    }

    pub fn trace_dim(&self) -> usize {
        self.a_hathat.rows()
    }

    /// Symmetric (indefinite) interior block `[[A_qq, A_qu], [A_quᵀ, −A_uu]]`.
    pub fn interior_block(&self) -> DenseMatrix {
        let n = self.scalar_dim();
        let mut a = DenseMatrix::zeros(3 * n, 3 * n);
        a.set_block(0, 0, &self.a_qq);
        a.set_block(0, 2 * n, &self.a_qu);
        a.set_block(2 * n, 0, &self.a_qu.transpose());
        for i in 0..n {
            for j in 0..n {
                a[(2 * n + i, 2 * n + j)] = -self.a_uu[(i, j)];
            }
        }
        a
    }

    /// Interior block tested with `(v, −w)`: `[[A_qq, A_qu], [−A_quᵀ, A_uu]]`.
    /// Its symmetric part is `diag(A_qq, A_uu)`, positive definite for `τ > 0`.
    pub fn energy_block(&self) -> DenseMatrix {
        let mut a = self.interior_block();
        let n = self.scalar_dim();
        for i in 2 * n..3 * n {
            for j in 0..3 * n {
                a[(i, j)] = -a[(i, j)];
            }
        }
        a
    }

    /// Coupling `G = [A_qû; A_uû]` between interior unknowns and traces.
    pub fn coupling(&self) -> DenseMatrix {
        let n = self.scalar_dim();
        let mut g = DenseMatrix::zeros(3 * n, self.trace_dim());
        g.set_block(0, 0, &self.a_qhat);
        g.set_block(2 * n, 0, &self.a_uhat);
        g
    }

    /// The full element matrix of `B` (trial columns, test rows).
    pub fn element_matrix(&self) -> DenseMatrix {
        let n = self.scalar_dim();
        let t = self.trace_dim();
        let mut full = DenseMatrix::zeros(3 * n + t, 3 * n + t);
        full.set_block(0, 0, &self.interior_block());
        let g = self.coupling();
        full.set_block(0, 3 * n, &g);
        full.set_block(3 * n, 0, &g.transpose());
        for i in 0..t {
            for j in 0..t {
                full[(3 * n + i, 3 * n + j)] = -self.a_hathat[(i, j)];
            }
        }
        full
    }
}

/// Elementwise substitution maps `(q, u) = A⁻¹ (r − G û)`, `r = [0; −load]`.
#[derive(Clone, Debug)]
pub struct Recovery {
    scalar_dim: usize,
    lu: LuFactors,
    ainv_g: DenseMatrix,
}

impl Recovery {
    fn interior_load(&self, local_load: &[f64]) -> Vec<f64> {
        let n = self.scalar_dim;
        let mut r = vec![0.0; 3 * n];
        for (ri, l) in r[2 * n..].iter_mut().zip(local_load) {
            *ri = -l;
        }
        r
    }

    /// Interior unknowns `[q; u]` for the given load and trace coefficients.
    pub fn recover(&self, local_load: &[f64], trace: &[f64]) -> Vec<f64> {
        let mut x = self.lu.solve(&self.interior_load(local_load));
        for (i, xi) in x.iter_mut().enumerate() {
            let row = self.ainv_g.row(i);
            *xi -= row.iter().zip(trace).map(|(a, t)| a * t).sum::<f64>();
        }
        x
    }

    /// Right-hand side contribution `Gᵀ A⁻¹ r` of this element.
    pub fn schur_load(&self, local_load: &[f64]) -> Vec<f64> {
        // A is symmetric, so Gᵀ A⁻¹ = (A⁻¹ G)ᵀ.
        self.ainv_g.tr_matvec(&self.interior_load(local_load))
    }
}

/// Result of [`condense`].
#[derive(Clone, Debug)]
pub struct Condensed {
    /// `S_K = A_ûû + Gᵀ A⁻¹ G`.
    pub schur: DenseMatrix,
    /// `g_K = Gᵀ A⁻¹ r`.
    pub load: Vec<f64>,
    pub recovery: Recovery,
}

/// Assemble the element blocks by quadrature.
pub fn build_local_operators(
    mesh: &Mesh,
    element: usize,
    reference: &ReferenceElement,
    c: &Coefficient,
    tau: &Stabilization,
) -> Result<LocalOperators> {
    let geom = ElementGeometry::new(mesh, reference, element, tau)?;
    Ok(local_operators_from_geometry(&geom, element, reference, c))
}

pub(crate) fn local_operators_from_geometry(
    geom: &ElementGeometry,
    element: usize,
    reference: &ReferenceElement,
    c: &Coefficient,
) -> LocalOperators {
    let n = reference.dim();
    let m = reference.edge_dim();
    let mut a_qq = DenseMatrix::zeros(2 * n, 2 * n);
    let mut a_qu = DenseMatrix::zeros(2 * n, n);
    let mut a_qhat = DenseMatrix::zeros(2 * n, 3 * m);
    let mut a_uu = DenseMatrix::zeros(n, n);
    let mut a_uhat = DenseMatrix::zeros(n, 3 * m);
    let mut a_hathat = DenseMatrix::zeros(3 * m, 3 * m);

    let mut grads = vec![[0.0; 2]; n];
    for (q, x, w) in geom.volume_points(reference) {
        let phi = reference.values_at_qp(q);
        for (g, gr) in grads.iter_mut().zip(reference.grads_at_qp(q)) {
            *g = geom.map.grad_to_physical(*gr);
        }
        let cx = c.at(x);
        for i in 0..n {
            for j in 0..n {
                let mass = w * phi[i] * phi[j];
                for a in 0..2 {
                    for b in 0..2 {
                        a_qq[(a * n + i, b * n + j)] += cx[a][b] * mass;
                    }
                }
                // −(u_j, ∂_a v_i)
                a_qu[(i, j)] -= w * phi[j] * grads[i][0];
                a_qu[(n + i, j)] -= w * phi[j] * grads[i][1];
            }
        }
    }

    let mut phi = vec![0.0; n];
    for (le, edge) in geom.edges.iter().enumerate() {
        for (q, (&xi, &w)) in edge.ref_points.iter().zip(&edge.weights).enumerate() {
            reference.basis_at(xi, &mut phi);
            let mu = reference.edge_values_at_qp(q);
            for i in 0..n {
                for r in 0..m {
                    let col = le * m + r;
                    let pm = w * phi[i] * mu[r];
                    a_qhat[(i, col)] += pm * edge.normal[0];
                    a_qhat[(n + i, col)] += pm * edge.normal[1];
                    a_uhat[(i, col)] += edge.tau * pm;
                }
                for j in 0..n {
                    a_uu[(i, j)] += edge.tau * w * phi[i] * phi[j];
                }
            }
            for r in 0..m {
                for s in 0..m {
                    a_hathat[(le * m + r, le * m + s)] += edge.tau * w * mu[r] * mu[s];
                }
            }
        }
    }

    LocalOperators {
        element,
        faces: [geom.edges[0].face, geom.edges[1].face, geom.edges[2].face],
        a_qq,
        a_qu,
        a_qhat,
        a_uu,
        a_uhat,
        a_hathat,
    }
}

/// Eliminate `(q, u)` in favour of the trace unknowns.
pub fn condense(ops: &LocalOperators, local_load: &[f64]) -> Result<Condensed> {
    let recovery = recovery(ops)?;
    let schur = schur_complement(ops, &recovery);
    let load = recovery.schur_load(local_load);
    Ok(Condensed { schur, load, recovery })
}

pub(crate) fn schur_complement(ops: &LocalOperators, recovery: &Recovery) -> DenseMatrix {
    let mut schur = ops.coupling().transpose().matmul(&recovery.ainv_g);
    for i in 0..schur.rows() {
        for j in 0..schur.cols() {
            schur[(i, j)] += ops.a_hathat[(i, j)];
        }
    }
    schur
}

pub(crate) fn recovery(ops: &LocalOperators) -> Result<Recovery> {
    let lu = ops
        .interior_block()
        .lu()
        .map_err(|_| Error::DegenerateElement { element: ops.element })?;
    let ainv_g = lu.solve_matrix(&ops.coupling());
    Ok(Recovery { scalar_dim: ops.scalar_dim(), lu, ainv_g })
}

/// `(f, φ_i)_K` for every basis function.
pub fn element_load(
    mesh: &Mesh,
    e: usize,
    reference: &ReferenceElement,
    f: &(dyn Fn(Point) -> f64 + Sync),
) -> Vec<f64> {
    let map = AffineMap::new(mesh.element_vertices(e));
    load_on_map(&map, reference, f)
}

pub(crate) fn load_on_map(map: &AffineMap, reference: &ReferenceElement, f: &(dyn Fn(Point) -> f64 + Sync)) -> Vec<f64> {
    let n = reference.dim();
    let rule = reference.triangle_rule();
    let det = map.det.abs();
    let mut load = vec![0.0; n];
    for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let fw = w * det * f(map.to_physical(p));
        for (l, phi) in load.iter_mut().zip(reference.values_at_qp(q)) {
            *l += fw * phi;
        }
    }
    load
}

/// The HDG projection `(Π_V q, Π_W u)` on one element.
///
/// Volume moments against `[P^{k−1}]²` and `P^{k−1}`, face moments of
/// `Π_V q·n + τ Π_W u` against `P^k(F)`. Returns `(q coefficients, u coefficients)`.
pub fn hdg_project(
    mesh: &Mesh,
    e: usize,
    reference: &ReferenceElement,
    tau: &Stabilization,
    q_exact: &(dyn Fn(Point) -> [f64; 2] + Sync),
    u_exact: &(dyn Fn(Point) -> f64 + Sync),
) -> Result<(Vec<f64>, Vec<f64>)> {
    tau.validate(mesh)?;
    let geom = ElementGeometry::new(mesh, reference, e, tau)?;
    let k = reference.degree();
    let n = reference.dim();
    let m = reference.edge_dim();
    let low = if k == 0 { 0 } else { triangle_dim(k - 1) };
    let size = 3 * n;
    let mut a = DenseMatrix::zeros(size, size);
    let mut b = vec![0.0; size];

    // volume moments: rows [0, low) and [low, 2 low) for q, [2 low, 3 low) for u
    for (q, x, w) in geom.volume_points(reference) {
        let phi = reference.values_at_qp(q);
        let qx = q_exact(x);
        let ux = u_exact(x);
        for i in 0..low {
            for j in 0..n {
                let mass = w * phi[i] * phi[j];
                a[(i, j)] += mass;
                a[(low + i, n + j)] += mass;
                a[(2 * low + i, 2 * n + j)] += mass;
            }
            b[i] += w * qx[0] * phi[i];
            b[low + i] += w * qx[1] * phi[i];
            b[2 * low + i] += w * ux * phi[i];
        }
    }

    let mut phi = vec![0.0; n];
    let base = 3 * low;
    for (le, edge) in geom.edges.iter().enumerate() {
        for (q, (&xi, &w)) in edge.ref_points.iter().zip(&edge.weights).enumerate() {
            reference.basis_at(xi, &mut phi);
            let mu = reference.edge_values_at_qp(q);
            let x = edge.phys_points[q];
            let qx = q_exact(x);
            let target = qx[0] * edge.normal[0] + qx[1] * edge.normal[1] + edge.tau * u_exact(x);
            for r in 0..m {
                let row = base + le * m + r;
                let wm = w * mu[r];
                for j in 0..n {
                    a[(row, j)] += wm * phi[j] * edge.normal[0];
                    a[(row, n + j)] += wm * phi[j] * edge.normal[1];
                    a[(row, 2 * n + j)] += wm * edge.tau * phi[j];
                }
                b[row] += wm * target;
            }
        }
    }

    let x = a.lu().map_err(|_| Error::ProjectionFailure { element: e })?.solve(&b);
    Ok((x[..2 * n].to_vec(), x[2 * n..].to_vec()))
}

/// `L²(K)` projection onto `P^ℓ(K)`, `ℓ <= k`, in the first `dim P^ℓ` basis
/// functions of `reference`.
pub fn l2_project_element(
    mesh: &Mesh,
    e: usize,
    reference: &ReferenceElement,
    degree: usize,
    f: &(dyn Fn(Point) -> f64 + Sync),
) -> Result<Vec<f64>> {
    if degree > reference.degree() {
        return Err(Error::invalid("projection degree exceeds the reference element degree"));
    }
    let map = AffineMap::new(mesh.element_vertices(e));
    let d = triangle_dim(degree);
    let rule = reference.triangle_rule();
    let det = map.det.abs();
    let mut gram = DenseMatrix::zeros(d, d);
    let mut rhs = vec![0.0; d];
    for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let phi = reference.values_at_qp(q);
        let fx = f(map.to_physical(p));
        for i in 0..d {
            for j in 0..d {
                gram[(i, j)] += w * det * phi[i] * phi[j];
            }
            rhs[i] += w * det * fx * phi[i];
        }
    }
    Ok(gram.lu()?.solve(&rhs))
}

/// `L²(F)` projection onto `P^k(F)` in the canonical face orientation.
pub fn l2_project_face(
    mesh: &Mesh,
    face: usize,
    reference: &ReferenceElement,
    f: &(dyn Fn(Point) -> f64 + Sync),
) -> Result<Vec<f64>> {
    let m = reference.edge_dim();
    let rule = reference.edge_rule();
    let [p0, p1] = mesh.face_endpoints(face);
    let len = mesh.faces[face].length;
    let mut gram = DenseMatrix::zeros(m, m);
    let mut rhs = vec![0.0; m];
    for (q, (&s, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let mu = reference.edge_values_at_qp(q);
        let fx = f([p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1])]);
        for i in 0..m {
            for j in 0..m {
                gram[(i, j)] += w * len * mu[i] * mu[j];
            }
            rhs[i] += w * len * fx * mu[i];
        }
    }
    Ok(gram.lu()?.solve(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_unit_square, Diagonal};
    use rand::{Rng, SeedableRng};

    fn one_triangle() -> Mesh {
        Mesh::from_triangles(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap()
    }

    fn eval(reference: &ReferenceElement, map: &AffineMap, coeffs: &[f64], x: Point) -> f64 {
        let mut phi = vec![0.0; reference.dim()];
        reference.basis_at(map.to_reference(x), &mut phi);
        phi.iter().zip(coeffs).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn piecewise_constant_flux_mass() {
        // k = 0 on the unit right triangle. The basis constant is √2 (unit
        // L² norm on T̂), so A_qq = 2|K| I = I rather than |K| I for φ ≡ 1.
        let mesh = one_triangle();
        let r = ReferenceElement::new(0).unwrap();
        let ops = build_local_operators(&mesh, 0, &r, &Coefficient::Identity, &Stabilization::Constant(1.0)).unwrap();
        let expected = DenseMatrix::identity(2);
        for i in 0..2 {
            for j in 0..2 {
                assert!((ops.a_qq[(i, j)] - expected[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn blocks_are_symmetric_and_definite() {
        let mesh = build_unit_square(2, Diagonal::Right).unwrap();
        let c = Coefficient::Constant([[2.0, 0.3], [0.3, 1.0]]);
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        for k in 0..=3 {
            let r = ReferenceElement::new(k).unwrap();
            for e in 0..mesh.num_elements() {
                let ops = build_local_operators(&mesh, e, &r, &c, &Stabilization::Constant(1.0)).unwrap();
                assert!(ops.a_qq.asymmetry() < 1e-14);
                assert!(ops.element_matrix().asymmetry() < 1e-14);
                let energy = ops.energy_block();
                for _ in 0..10 {
                    let x: Vec<f64> = (0..energy.rows()).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let ax = energy.matvec(&x);
                    assert!(x.iter().zip(&ax).map(|(a, b)| a * b).sum::<f64>() > 0.0);
                }
                let cond = condense(&ops, &vec![0.0; r.dim()]).unwrap();
                assert!(cond.schur.asymmetry() <= 1e-12 * cond.schur.max_abs());
            }
        }
    }

    #[test]
    fn degenerate_element_is_rejected() {
        let mesh = Mesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            triangles: vec![[0, 1, 2]],
            faces: vec![],
            element_faces: vec![],
            h_max: 2.0,
            h_min: 2.0,
        };
        let r = ReferenceElement::new(1).unwrap();
        let err = build_local_operators(&mesh, 0, &r, &Coefficient::Identity, &Stabilization::default());
        assert!(matches!(err, Err(Error::DegenerateElement { element: 0 })));
    }

    #[test]
    fn zero_load_zero_trace_recovers_zero() {
        let mesh = one_triangle();
        let r = ReferenceElement::new(2).unwrap();
        let ops = build_local_operators(&mesh, 0, &r, &Coefficient::Identity, &Stabilization::default()).unwrap();
        let cond = condense(&ops, &vec![0.0; r.dim()]).unwrap();
        let x = cond.recovery.recover(&vec![0.0; r.dim()], &vec![0.0; 3 * r.edge_dim()]);
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_element_recovery_matches_uncondensed_solve() {
        // û = 0 on all faces, f = 1, k = 1: solve the interior system of the
        // full element matrix densely and compare with the condensed recovery.
        let mesh = one_triangle();
        let r = ReferenceElement::new(1).unwrap();
        let ops = build_local_operators(&mesh, 0, &r, &Coefficient::Identity, &Stabilization::default()).unwrap();
        let load = element_load(&mesh, 0, &r, &|_| 1.0);
        let cond = condense(&ops, &load).unwrap();
        let x = cond.recovery.recover(&load, &[0.0; 6]);

        let n = r.dim();
        let full = ops.element_matrix();
        let mut interior = DenseMatrix::zeros(3 * n, 3 * n);
        for i in 0..3 * n {
            for j in 0..3 * n {
                interior[(i, j)] = full[(i, j)];
            }
        }
        let mut rhs = vec![0.0; 3 * n];
        for i in 0..n {
            rhs[2 * n + i] = -load[i];
        }
        let dense = crate::linalg::dense_solve(&interior, &DenseMatrix::column(&rhs)).unwrap();
        for (a, b) in x.iter().zip(dense.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn schur_complement_reproduces_trace_rows() {
        // S_K λ − g_K must equal the trace rows of the element matrix applied
        // to (recovered q, u, λ) with the sign of the ŵ equation.
        let mesh = build_unit_square(1, Diagonal::Left).unwrap();
        let r = ReferenceElement::new(2).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for e in 0..2 {
            let ops = build_local_operators(&mesh, e, &r, &Coefficient::Identity, &Stabilization::Constant(3.0)).unwrap();
            let load: Vec<f64> = (0..r.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let cond = condense(&ops, &load).unwrap();
            let lambda: Vec<f64> = (0..ops.trace_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = cond.recovery.recover(&load, &lambda);
            let mut full_x = x.clone();
            full_x.extend_from_slice(&lambda);
            let y = ops.element_matrix().matvec(&full_x);
            let s_lambda = cond.schur.matvec(&lambda);
            let interior = 3 * r.dim();
            for i in 0..ops.trace_dim() {
                // trace row: Gᵀx − A_ûû λ = g_K − S_K λ
                let expected = cond.load[i] - s_lambda[i];
                assert!((y[interior + i] - expected).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn hdg_projection_reproduces_polynomials() {
        let mesh = build_unit_square(2, Diagonal::Right).unwrap();
        for k in 0..=3 {
            let r = ReferenceElement::new(k).unwrap();
            for tau in [1e-3, 1.0, 1e3] {
                let st = Stabilization::Constant(tau);
                for e in 0..mesh.num_elements() {
                    let map = AffineMap::new(mesh.element_vertices(e));
                    let ux = |p: Point| if k == 0 { 2.0 } else { 1.0 + p[0] - 2.0 * p[1] + (k as f64 - 1.0) * p[0] * p[1] };
                    let qx = |p: Point| if k == 0 { [0.5, -1.0] } else { [p[1] * (k as f64 - 1.0), 3.0 - p[0]] };
                    let (pq, pu) = hdg_project(&mesh, e, &r, &st, &qx, &ux).unwrap();
                    let n = r.dim();
                    for x in [[0.1, 0.2], [0.4, 0.35], mesh.element_vertices(e)[1]] {
                        assert!((eval(&r, &map, &pu, x) - ux(x)).abs() < 1e-10, "k={k} tau={tau}");
                        assert!((eval(&r, &map, &pq[..n], x) - qx(x)[0]).abs() < 1e-10);
                        assert!((eval(&r, &map, &pq[n..], x) - qx(x)[1]).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn l2_projection_of_x_squared_onto_constants() {
        let mesh = one_triangle();
        let r = ReferenceElement::new(2).unwrap();
        let c = l2_project_element(&mesh, 0, &r, 0, &|p| p[0] * p[0]).unwrap();
        let map = AffineMap::new(mesh.element_vertices(0));
        // mean of x² over the reference triangle: (1/12) / (1/2)
        assert!((eval(&r, &map, &[c[0], 0.0, 0.0, 0.0, 0.0, 0.0], [0.3, 0.3]) - 1.0 / 6.0).abs() < 1e-14);
        // polynomials of degree <= ℓ are reproduced
        let p = |x: Point| 1.0 - x[0] + 3.0 * x[1] * x[1];
        let c2 = l2_project_element(&mesh, 0, &r, 2, &p).unwrap();
        assert!((eval(&r, &map, &c2, [0.2, 0.7]) - p([0.2, 0.7])).abs() < 1e-12);
    }

    #[test]
    fn face_projection_reproduces_polynomials() {
        let mesh = build_unit_square(2, Diagonal::Right).unwrap();
        let r = ReferenceElement::new(2).unwrap();
        let f = |p: Point| 1.0 + p[0] - p[0] * p[1];
        for face in 0..mesh.num_faces() {
            let c = l2_project_face(&mesh, face, &r, &f).unwrap();
            let [p0, p1] = mesh.face_endpoints(face);
            for s in [0.0, 0.3, 1.0] {
                let mut mu = [0.0; 3];
                crate::basis::edge_basis_at(2, s, &mut mu);
                let x = [p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1])];
                let v: f64 = mu.iter().zip(&c).map(|(a, b)| a * b).sum();
                assert!((v - f(x)).abs() < 1e-12);
            }
        }
    }
}
