//! Local `P^{k+1}` reconstruction `u_h^⋆`.
//!
//! On each element, `u_h^⋆` satisfies `(∇u_h^⋆, ∇z)_K = −(c q_h, ∇z)_K` for
//! mean-zero `z ∈ P^{k+1}(K)` and `(u_h^⋆, 1)_K = (u_h, 1)_K`. The mean-zero
//! restriction is imposed through a Lagrange multiplier on the constant mode:
//!
//! ```text
//! [ K   m ] [u⋆]   [ b      ]
//! [ mᵀ  0 ] [λ ] = [ (u_h,1) ]
//! ```
//!
//! with `K` the `P^{k+1}` stiffness matrix and `m_i = (φ_i, 1)_K`. Testing
//! with `z = 1` gives `λ (1,1)_K = 0`, so the multiplier vanishes and the
//! stiffness equation holds for the whole of `P^{k+1}`.

use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{AffineMap, ReferenceElement};
use crate::error::{Error, Result};
use crate::fields::Coefficient;
use crate::hdg_solver::FieldSolution;
use crate::linalg::DenseMatrix;
use crate::mesh::Mesh;

/// Computes `u_h^⋆` and returns a copy of `solution` carrying it.
///
/// `reference` must match the solution degree `k`, `reference_star` must have
/// degree `k + 1`.
pub fn postprocess(
    mesh: &Mesh,
    reference: &ReferenceElement,
    reference_star: &ReferenceElement,
    solution: &FieldSolution,
    c: &Coefficient,
) -> Result<FieldSolution> {
    let k = solution.degree;
    if reference.degree() != k || reference_star.degree() != k + 1 {
        return Err(Error::invalid("postprocessing needs reference elements of degree k and k + 1"));
    }
    if reference_star.triangle_rule().degree < 2 * (k + 1) + 1 {
        return Err(Error::invalid("postprocessing quadrature must have exactness >= 2k + 3"));
    }
    let locals = crate::par::try_map_indices(mesh.num_elements(), |e| {
        local_postprocess(mesh, reference, reference_star, solution, c, e)
    })?;
    let mut out = solution.clone();
    out.ustar = Some(locals.concat());
    Ok(out)
}

fn local_postprocess(
    mesh: &Mesh,
    reference: &ReferenceElement,
    reference_star: &ReferenceElement,
    solution: &FieldSolution,
    c: &Coefficient,
    e: usize,
) -> Result<Vec<f64>> {
    let n1 = reference_star.dim();
    let map = AffineMap::new(mesh.element_vertices(e));
    let det = map.det.abs();
    let rule = reference_star.triangle_rule();
    let mut a = DenseMatrix::zeros(n1 + 1, n1 + 1);
    let mut rhs = vec![0.0; n1 + 1];
    let mut grads = vec![[0.0; 2]; n1];
    for (qp, (&xi, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let wd = w * det;
        let phi = reference_star.values_at_qp(qp);
        for (g, gr) in grads.iter_mut().zip(reference_star.grads_at_qp(qp)) {
            *g = map.grad_to_physical(*gr);
        }
        let qh = solution.q_at(reference, e, xi);
        let cx = c.at(map.to_physical(xi));
        let cq = [cx[0][0] * qh[0] + cx[0][1] * qh[1], cx[1][0] * qh[0] + cx[1][1] * qh[1]];
        let uh = solution.u_at(reference, e, xi);
        for i in 0..n1 {
            for j in 0..n1 {
                a[(i, j)] += wd * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
            }
            rhs[i] -= wd * (cq[0] * grads[i][0] + cq[1] * grads[i][1]);
            a[(i, n1)] += wd * phi[i];
            a[(n1, i)] += wd * phi[i];
        }
        rhs[n1] += wd * uh;
    }
    let x = a
        .lu()
        .map_err(|_| Error::PostprocessFailure { element: e })?
        .solve(&rhs);
    Ok(x[..n1].to_vec())
}
