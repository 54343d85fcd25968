//! Independent checks of the discretization.
//!
//! Everything here works from the definition of the bilinear form
//!
//! ```text
//! B(q,u,û; v,w,ŵ) = (cq,v) − (u,∇·v) + ⟨û,v·n⟩ − (∇·q,w) − ⟨τ(u−û),w−ŵ⟩ + ⟨q·n,ŵ⟩
//! ```
//!
//! evaluated by quadrature, without the element matrices or static
//! condensation of [`crate::hdg_local`].

use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{edge_basis_at, AffineMap, ReferenceElement};
use crate::error::{Error, Result};
use crate::fields::Coefficient;
use crate::hdg_local::{l2_project_face, Stabilization};
use crate::hdg_solver::{FieldSolution, ProblemData};
use crate::linalg::DenseMatrix;
use crate::mesh::{Mesh, Point};

/// Values of a discrete triple on one element at one point.
struct Local {
    q: [f64; 2],
    u: f64,
    div_q: f64,
}

fn eval_element(reference: &ReferenceElement, map: &AffineMap, s: &FieldSolution, e: usize, xi: Point) -> Local {
    let n = reference.dim();
    let mut phi = vec![0.0; n];
    let mut grads = vec![[0.0; 2]; n];
    reference.basis_at(xi, &mut phi);
    reference.grad_at(xi, &mut grads);
    let qc = s.q_on(e);
    let uc = s.u_on(e);
    let mut out = Local { q: [0.0; 2], u: 0.0, div_q: 0.0 };
    for i in 0..n {
        let g = map.grad_to_physical(grads[i]);
        out.q[0] += qc[i] * phi[i];
        out.q[1] += qc[n + i] * phi[i];
        out.u += uc[i] * phi[i];
        out.div_q += qc[i] * g[0] + qc[n + i] * g[1];
    }
    out
}

/// Points (canonical parameter `s`, physical point, weight times length) and
/// outward normal of local edge `le` of element `e`.
fn edge_points(mesh: &Mesh, reference: &ReferenceElement, e: usize, le: usize) -> (usize, Point, Vec<(f64, Point, f64)>) {
    let ef = mesh.element_faces[e][le];
    let face = &mesh.faces[ef.face];
    let [p0, p1] = mesh.face_endpoints(ef.face);
    let rule = reference.edge_rule();
    let pts = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(&s, &w)| (s, [p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1])], w * face.length))
        .collect();
    (ef.face, [ef.sign() * face.normal[0], ef.sign() * face.normal[1]], pts)
}

/// `B(a; b)` by direct quadrature. Both triples use the [`FieldSolution`]
/// layout; `ustar` and `stats` are ignored.
pub fn bilinear_form(
    mesh: &Mesh,
    reference: &ReferenceElement,
    c: &Coefficient,
    tau: &Stabilization,
    a: &FieldSolution,
    b: &FieldSolution,
) -> f64 {
    let rule = reference.triangle_rule();
    let mut total = 0.0;
    for e in 0..mesh.num_elements() {
        let map = AffineMap::new(mesh.element_vertices(e));
        let det = map.det.abs();
        for (&xi, &w) in rule.points.iter().zip(&rule.weights) {
            let x = map.to_physical(xi);
            let (p, t) = (eval_element(reference, &map, a, e, xi), eval_element(reference, &map, b, e, xi));
            let cx = c.at(x);
            let cq = [cx[0][0] * p.q[0] + cx[0][1] * p.q[1], cx[1][0] * p.q[0] + cx[1][1] * p.q[1]];
            total += w * det * (cq[0] * t.q[0] + cq[1] * t.q[1] - p.u * t.div_q - p.div_q * t.u);
        }
        for le in 0..3 {
            let (f, nrm, pts) = edge_points(mesh, reference, e, le);
            let tf = tau.on_face(f);
            for (s, x, w) in pts {
                let xi = map.to_reference(x);
                let (p, t) = (eval_element(reference, &map, a, e, xi), eval_element(reference, &map, b, e, xi));
                let (ah, bh) = (a.trace_at(f, s), b.trace_at(f, s));
                let qn = p.q[0] * nrm[0] + p.q[1] * nrm[1];
                let vn = t.q[0] * nrm[0] + t.q[1] * nrm[1];
                total += w * (ah * vn - tf * (p.u - ah) * (t.u - bh) + qn * bh);
            }
        }
    }
    total
}

/// `(c q, q) + ⟨τ (u − û), u − û⟩`, the value of `B(q,u,û; q,−u,−û)`.
pub fn energy(mesh: &Mesh, reference: &ReferenceElement, c: &Coefficient, tau: &Stabilization, a: &FieldSolution) -> f64 {
    let rule = reference.triangle_rule();
    let mut total = 0.0;
    for e in 0..mesh.num_elements() {
        let map = AffineMap::new(mesh.element_vertices(e));
        let det = map.det.abs();
        for (&xi, &w) in rule.points.iter().zip(&rule.weights) {
            let p = eval_element(reference, &map, a, e, xi);
            let cx = c.at(map.to_physical(xi));
            let cq = [cx[0][0] * p.q[0] + cx[0][1] * p.q[1], cx[1][0] * p.q[0] + cx[1][1] * p.q[1]];
            total += w * det * (cq[0] * p.q[0] + cq[1] * p.q[1]);
        }
        for le in 0..3 {
            let (f, _, pts) = edge_points(mesh, reference, e, le);
            for (s, x, w) in pts {
                let jump = eval_element(reference, &map, a, e, map.to_reference(x)).u - a.trace_at(f, s);
                total += w * tau.on_face(f) * jump * jump;
            }
        }
    }
    total
}

/// `(q, −u, −û)`.
pub fn negate_scalars(a: &FieldSolution) -> FieldSolution {
    let mut b = a.clone();
    b.u.iter_mut().chain(b.trace.iter_mut()).for_each(|v| *v = -*v);
    b
}

/// Number of coefficients in the flat layout `[q | u | û]`.
pub fn flat_len(mesh: &Mesh, degree: usize) -> usize {
    let n = crate::basis::triangle_dim(degree);
    3 * n * mesh.num_elements() + (degree + 1) * mesh.num_faces()
}

/// Builds a triple from the flat layout `[q | u | û]`.
pub fn from_flat(mesh: &Mesh, degree: usize, x: &[f64]) -> FieldSolution {
    let mut s = FieldSolution::zeros(mesh, degree);
    let (nq, nu) = (s.q.len(), s.u.len());
    s.q.copy_from_slice(&x[..nq]);
    s.u.copy_from_slice(&x[nq..nq + nu]);
    s.trace.copy_from_slice(&x[nq + nu..]);
    s
}

fn unit(mesh: &Mesh, degree: usize, i: usize) -> FieldSolution {
    let mut x = vec![0.0; flat_len(mesh, degree)];
    x[i] = 1.0;
    from_flat(mesh, degree, &x)
}

/// Solves the full uncondensed system `B(x; y) = −(f, w)` with a dense LU,
/// boundary traces fixed to `Π^∂ g`. Only sensible on small meshes.
pub fn dense_uncondensed_solve(mesh: &Mesh, data: &ProblemData) -> Result<FieldSolution> {
    let k = data.degree;
    let reference = ReferenceElement::new(k)?;
    let len = flat_len(mesh, k);
    let n = reference.dim();
    let m = k + 1;
    let trace_start = 3 * n * mesh.num_elements();
    let mut fixed = vec![None; len];
    for f in mesh.boundary_faces() {
        let g = l2_project_face(mesh, f, &reference, &*data.g)?;
        for (j, v) in g.into_iter().enumerate() {
            fixed[trace_start + f * m + j] = Some(v);
        }
    }
    let free: Vec<usize> = (0..len).filter(|&i| fixed[i].is_none()).collect();
    let units: Vec<FieldSolution> = (0..len).map(|i| unit(mesh, k, i)).collect();

    let mut a = DenseMatrix::zeros(free.len(), free.len());
    let mut rhs = vec![0.0; free.len()];
    let loads = (0..mesh.num_elements())
        .flat_map(|e| crate::hdg_local::element_load(mesh, e, &reference, &*data.f))
        .collect::<Vec<_>>();
    for (r, &i) in free.iter().enumerate() {
        // test function i; its load is −(f, w) for the scalar block only
        if (2 * n * mesh.num_elements()..trace_start).contains(&i) {
            rhs[r] = -loads[i - 2 * n * mesh.num_elements()];
        }
        for j in 0..len {
            let b = bilinear_form(mesh, &reference, &data.c, &data.tau, &units[j], &units[i]);
            if b == 0.0 {
                continue;
            }
            match fixed[j] {
                Some(v) => rhs[r] -= b * v,
                None => {
                    let col = free.binary_search(&j).map_err(|_| Error::invalid("free index lookup"))?;
                    a[(r, col)] = b;
                }
            }
        }
    }
    let y = a.lu()?.solve(&rhs);
    let mut x: Vec<f64> = fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
    for (r, &i) in free.iter().enumerate() {
        x[i] = y[r];
    }
    Ok(from_flat(mesh, k, &x))
}

/// Largest `|B(sol; y) + (f, w)|` over all test basis functions `y` whose
/// trace part vanishes on the boundary.
pub fn galerkin_residual(mesh: &Mesh, data: &ProblemData, sol: &FieldSolution) -> Result<f64> {
    let k = data.degree;
    let reference = ReferenceElement::new(k)?;
    let n = reference.dim();
    let m = k + 1;
    let trace_start = 3 * n * mesh.num_elements();
    let boundary: Vec<bool> = {
        let mut b = vec![false; mesh.num_faces()];
        mesh.boundary_faces().into_iter().for_each(|f| b[f] = true);
        b
    };
    let mut worst = 0.0f64;
    for i in 0..flat_len(mesh, k) {
        if i >= trace_start && boundary[(i - trace_start) / m] {
            continue;
        }
        let test = unit(mesh, k, i);
        let mut r = bilinear_form(mesh, &reference, &data.c, &data.tau, sol, &test);
        if (2 * n * mesh.num_elements()..trace_start).contains(&i) {
            let rel = i - 2 * n * mesh.num_elements();
            let e = rel / n;
            r += crate::hdg_local::element_load(mesh, e, &reference, &*data.f)[rel % n];
        }
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Per element `⟨q_h·n + τ(u_h − û_h), 1⟩_{∂K} − (f, 1)_K`.
pub fn conservation_defects(
    mesh: &Mesh,
    reference: &ReferenceElement,
    tau: &Stabilization,
    f: &(dyn Fn(Point) -> f64 + Sync),
    sol: &FieldSolution,
) -> Vec<f64> {
    let rule = reference.triangle_rule();
    (0..mesh.num_elements())
        .map(|e| {
            let map = AffineMap::new(mesh.element_vertices(e));
            let det = map.det.abs();
            let mut d = 0.0;
            for le in 0..3 {
                let (face, nrm, pts) = edge_points(mesh, reference, e, le);
                for (s, x, w) in pts {
                    let p = eval_element(reference, &map, sol, e, map.to_reference(x));
                    d += w * (p.q[0] * nrm[0] + p.q[1] * nrm[1] + tau.on_face(face) * (p.u - sol.trace_at(face, s)));
                }
            }
            for (&xi, &w) in rule.points.iter().zip(&rule.weights) {
                d -= w * det * f(map.to_physical(xi));
            }
            d
        })
        .collect()
}

/// Largest moment `|⟨[[q̂_h·n]], μ⟩_F|` of the numerical flux jump over interior
/// faces and trace basis functions `μ`.
pub fn flux_jump_residual(mesh: &Mesh, reference: &ReferenceElement, tau: &Stabilization, sol: &FieldSolution) -> f64 {
    let k = reference.degree();
    let mut mu = vec![0.0; k + 1];
    let mut jumps = vec![vec![0.0; k + 1]; mesh.num_faces()];
    for e in 0..mesh.num_elements() {
        let map = AffineMap::new(mesh.element_vertices(e));
        for le in 0..3 {
            let (face, nrm, pts) = edge_points(mesh, reference, e, le);
            for (s, x, w) in pts {
                let p = eval_element(reference, &map, sol, e, map.to_reference(x));
                let flux = p.q[0] * nrm[0] + p.q[1] * nrm[1] + tau.on_face(face) * (p.u - sol.trace_at(face, s));
                edge_basis_at(k, s, &mut mu);
                for (j, m) in jumps[face].iter_mut().zip(&mu) {
                    *j += w * flux * m;
                }
            }
        }
    }
    mesh.interior_faces().into_iter().flat_map(|f| jumps[f].clone()).fold(0.0, |a, v| a.max(v.abs()))
}
