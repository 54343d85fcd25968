//! Dirichlet boundary control: minimize `½‖u − u_d‖² + (γ/2)‖g‖²_{∂Ω}`
//! subject to the HDG discretization of `−Δu = f`, `u = g` on `∂Ω`.
//!
//! The control `g_h` lives in the boundary trace space. Eliminating the state
//! and the adjoint gives the SPD reduced system
//!
//! ```text
//! H g = γ M_∂ g + b(z_h[u_h(g)]) = −b(z_h[u_f − u_d])
//! ```
//!
//! where `u_h(g)` is the state with `f = 0`, `u_f` the state with boundary data
//! zero, `z_h[s]` the adjoint solution with source `s` and homogeneous trace,
//! and `b_m(z_h) = ⟨p_h·n + τ z_h, μ_m⟩_{∂Ω}`. The residual `H g − rhs` is the
//! discrete optimality condition `⟨γ g_h + p_h·n + τ z_h, ŵ⟩ = 0`.

use alloc::vec;
use alloc::vec::Vec;
use core::cell::{Cell, RefCell};

use crate::basis::{AffineMap, ReferenceElement};
use crate::error::{Error, Result};
use crate::fields::{Coefficient, ScalarFn};
use crate::hdg_local::Stabilization;
use crate::hdg_solver::{FieldSolution, HdgSystem};
use crate::linalg::{pcg, CgReport};
use crate::mesh::{Domain, Mesh, Point};
use crate::problems::Manufactured;

/// Exact optimal state and adjoint; `q = −∇u`, `p = −∇z`, `g = γ⁻¹ ∂_n z`.
#[derive(Clone)]
pub struct ControlExact {
    pub state: Manufactured,
    pub adjoint: Manufactured,
}

#[derive(Clone)]
pub struct ControlProblemData {
    pub f: ScalarFn,
    pub u_d: ScalarFn,
    pub gamma: f64,
    pub tau: Stabilization,
    pub degree: usize,
    /// Relative tolerance of the reduced conjugate gradient iteration.
    pub tol: f64,
    pub exact: Option<ControlExact>,
}

impl ControlProblemData {
    pub fn new(f: ScalarFn, u_d: ScalarFn, gamma: f64, degree: usize) -> Self {
        ControlProblemData { f, u_d, gamma, tau: Stabilization::default(), degree, tol: 1e-10, exact: None }
    }

    /// Exact control on boundary face with outward unit normal `n`.
    pub fn exact_control(&self, x: Point, n: Point) -> Option<f64> {
        let ex = self.exact.as_ref()?;
        let g = (ex.adjoint.grad)(x);
        Some((g[0] * n[0] + g[1] * n[1]) / self.gamma)
    }
}

/// Data whose optimal solution is `(u, z)`: `f = −Δu`, `u_d = u + Δz`.
///
/// Fails unless `z = 0` and `u = γ⁻¹ ∂_n z` on `∂Ω` (checked at 100 points per
/// boundary segment).
pub fn manufactured_control_data(
    state: &Manufactured,
    adjoint: &Manufactured,
    gamma: f64,
    domain: Domain,
) -> Result<ControlProblemData> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma must be positive"));
    }
    for seg in domain.boundary_segments() {
        let d = [seg.end[0] - seg.start[0], seg.end[1] - seg.start[1]];
        let len = libm::hypot(d[0], d[1]);
        let n = [d[1] / len, -d[0] / len];
        for i in 0..100 {
            let t = (i as f64 + 0.5) / 100.0;
            let x = [seg.start[0] + t * d[0], seg.start[1] + t * d[1]];
            let gz = (adjoint.grad)(x);
            let u = (state.u)(x);
            let dn = (gz[0] * n[0] + gz[1] * n[1]) / gamma;
            let defect = libm::fmax((adjoint.u)(x).abs(), (u - dn).abs());
            if defect > 1e-10 * libm::fmax(1.0, u.abs()) {
                return Err(Error::InconsistentManufacturedData { x: x[0], y: x[1], defect });
            }
        }
    }
    let u = state.u.clone();
    let lz = adjoint.laplacian.clone();
    let mut data = ControlProblemData::new(
        state.source(),
        crate::fields::scalar_fn(move |x| u(x) + lz(x)),
        gamma,
        1,
    );
    data.exact = Some(ControlExact { state: state.clone(), adjoint: adjoint.clone() });
    Ok(data)
}

/// State, adjoint and control at the computed optimum.
#[derive(Clone, Debug)]
pub struct ControlSolution {
    /// `(q_h, u_h, û_h)`; the boundary trace equals `g_h`.
    pub state: FieldSolution,
    /// `(p_h, z_h, ẑ_h)`.
    pub adjoint: FieldSolution,
    /// `g_h` in trace layout (`k + 1` per face, zero on interior faces).
    pub g: Vec<f64>,
    pub outer: CgReport,
    /// Number of HDG solves performed.
    pub hdg_solves: usize,
}

/// Reduced-space solver for one mesh and data set. State and adjoint share the
/// skeleton matrix, which is assembled once.
pub struct ControlSolver<'m> {
    system: HdgSystem<'m>,
    gamma: f64,
    tol: f64,
    boundary: Vec<usize>,
    f_loads: Vec<f64>,
    ud_loads: Vec<f64>,
    solves: Cell<usize>,
}

impl<'m> ControlSolver<'m> {
    pub fn new(mesh: &'m Mesh, data: &ControlProblemData) -> Result<Self> {
        if !(data.gamma > 0.0) {
            return Err(Error::invalid("gamma must be positive"));
        }
        let reference = ReferenceElement::new(data.degree)?;
        let system = HdgSystem::new(mesh, reference, &Coefficient::Identity, data.tau.clone())?;
        let f_loads = system.loads_from_fn(&*data.f);
        let ud_loads = system.loads_from_fn(&*data.u_d);
        Ok(ControlSolver {
            system,
            gamma: data.gamma,
            tol: data.tol,
            boundary: mesh.boundary_faces(),
            f_loads,
            ud_loads,
            solves: Cell::new(0),
        })
    }

    pub fn system(&self) -> &HdgSystem<'m> {
        &self.system
    }

    fn m(&self) -> usize {
        self.system.reference().edge_dim()
    }

    /// Number of reduced unknowns (`k + 1` per boundary face).
    pub fn dim(&self) -> usize {
        self.boundary.len() * self.m()
    }

    /// Reduced vector to trace layout.
    pub fn to_trace(&self, g: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut t = vec![0.0; m * self.system.mesh().num_faces()];
        for (i, &f) in self.boundary.iter().enumerate() {
            t[f * m..(f + 1) * m].copy_from_slice(&g[i * m..(i + 1) * m]);
        }
        t
    }

    fn solve(&self, loads: &[f64], trace: &[f64]) -> Result<FieldSolution> {
        self.solves.set(self.solves.get() + 1);
        self.system.solve(loads, trace)
    }

    /// State for control `g` (reduced layout), with or without `f`.
    pub fn state(&self, g: &[f64], with_source: bool) -> Result<FieldSolution> {
        let loads = if with_source { self.f_loads.clone() } else { vec![0.0; self.f_loads.len()] };
        self.solve(&loads, &self.to_trace(g))
    }

    /// Adjoint with source `u_h − u_d` (or `u_h` alone), homogeneous trace.
    pub fn adjoint(&self, state: &FieldSolution, with_target: bool) -> Result<FieldSolution> {
        let mesh = self.system.mesh();
        let n = self.system.reference().dim();
        let mut loads = vec![0.0; self.f_loads.len()];
        for e in 0..mesh.num_elements() {
            // orthonormal reference basis: the element mass matrix is |det J| I
            let det = AffineMap::new(mesh.element_vertices(e)).det.abs();
            for i in 0..n {
                loads[e * n + i] = det * state.u[e * n + i];
            }
        }
        if with_target {
            for (l, d) in loads.iter_mut().zip(&self.ud_loads) {
                *l -= d;
            }
        }
        let zero = vec![0.0; state.trace.len()];
        self.solve(&loads, &zero)
    }

    /// `b_m = ⟨p_h·n + τ z_h, μ_m⟩_F` on every boundary face, reduced layout.
    pub fn boundary_flux(&self, adjoint: &FieldSolution) -> Vec<f64> {
        let mesh = self.system.mesh();
        let reference = self.system.reference();
        let rule = reference.edge_rule();
        let m = self.m();
        let mut b = vec![0.0; self.dim()];
        for (i, &f) in self.boundary.iter().enumerate() {
            let face = &mesh.faces[f];
            let e = face.left;
            let map = AffineMap::new(mesh.element_vertices(e));
            let tau = self.system.stabilization().on_face(f);
            let [p0, p1] = mesh.face_endpoints(f);
            for (q, (&s, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let x = [p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1])];
                let xi = map.to_reference(x);
                let p = adjoint.q_at(reference, e, xi);
                let z = adjoint.u_at(reference, e, xi);
                let flux = p[0] * face.normal[0] + p[1] * face.normal[1] + tau * z;
                for (r, mu) in reference.edge_values_at_qp(q).iter().enumerate() {
                    b[i * m + r] += w * face.length * flux * mu;
                }
            }
        }
        b
    }

    /// Boundary mass matrix diagonal (orthonormal edge basis: face length).
    fn mass_diagonal(&self) -> Vec<f64> {
        let mesh = self.system.mesh();
        let m = self.m();
        self.boundary.iter().flat_map(|&f| core::iter::repeat_n(mesh.faces[f].length, m)).collect()
    }

    /// `H g`.
    pub fn apply_reduced(&self, g: &[f64]) -> Result<Vec<f64>> {
        Ok(self.apply_with_fields(g)?.0)
    }

    /// `H g` together with the homogeneous state and adjoint behind it.
    fn apply_with_fields(&self, g: &[f64]) -> Result<(Vec<f64>, FieldSolution, FieldSolution)> {
        let state = self.state(g, false)?;
        let adjoint = self.adjoint(&state, false)?;
        Ok((self.optimality_residual(g, &adjoint), state, adjoint))
    }

    /// `−b(z_h[u_f − u_d])`.
    pub fn reduced_rhs(&self) -> Result<Vec<f64>> {
        Ok(self.rhs_with_fields()?.0)
    }

    fn rhs_with_fields(&self) -> Result<(Vec<f64>, FieldSolution, FieldSolution)> {
        let uf = self.state(&vec![0.0; self.dim()], true)?;
        let adjoint = self.adjoint(&uf, true)?;
        Ok((self.boundary_flux(&adjoint).into_iter().map(|v| -v).collect(), uf, adjoint))
    }

    /// Discrete objective `J_h(g) = ½‖u_h(g) − u_d‖² + (γ/2)‖g‖²_{∂Ω}`.
    pub fn objective(&self, g: &[f64], u_d: &(dyn Fn(Point) -> f64 + Sync)) -> Result<f64> {
        let state = self.state(g, true)?;
        let mesh = self.system.mesh();
        let reference = self.system.reference();
        let rule = reference.triangle_rule();
        let mut misfit = 0.0;
        for e in 0..mesh.num_elements() {
            let map = AffineMap::new(mesh.element_vertices(e));
            let det = map.det.abs();
            for (&xi, &w) in rule.points.iter().zip(&rule.weights) {
                let d = state.u_at(reference, e, xi) - u_d(map.to_physical(xi));
                misfit += w * det * d * d;
            }
        }
        let reg: f64 = g.iter().zip(self.mass_diagonal()).map(|(v, m)| m * v * v).sum();
        Ok(0.5 * misfit + 0.5 * self.gamma * reg)
    }

    /// `γ M_∂ g + b(z_h)` for the given control and its adjoint, per reduced
    /// dof. Vanishes at the optimum.
    pub fn optimality_residual(&self, g: &[f64], adjoint: &FieldSolution) -> Vec<f64> {
        let mut r = self.boundary_flux(adjoint);
        for ((ri, &gi), mi) in r.iter_mut().zip(g).zip(self.mass_diagonal()) {
            *ri += self.gamma * mi * gi;
        }
        r
    }

    /// Reduced conjugate gradients, then state and adjoint at the optimum.
    pub fn solve_optimum(&self) -> Result<ControlSolution> {
        let (rhs, uf, zf) = self.rhs_with_fields()?;
        let diag = self.mass_diagonal();
        let dim = self.dim();
        let last = RefCell::new(None);
        let (g, outer) = pcg(
            |x, y| {
                let (hx, state, adjoint) = self.apply_with_fields(x)?;
                y.copy_from_slice(&hx);
                *last.borrow_mut() = Some((x.to_vec(), state, adjoint));
                Ok(())
            },
            |r, z| {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(&diag) {
                    *zi = ri / (self.gamma * di);
                }
            },
            &rhs,
            None,
            self.tol,
            dim.max(50),
            |_| 0.0,
        )?;
        // CG exits right after applying H to the returned iterate, so the
        // optimal fields follow by linearity without two more solves
        let (state, adjoint) = match last.into_inner() {
            Some((x, s0, z0)) if x == g => (sum(&uf, &s0), sum(&zf, &z0)),
            _ => {
                let state = self.state(&g, true)?;
                let adjoint = self.adjoint(&state, true)?;
                (state, adjoint)
            }
        };
        let hdg_solves = self.solves.get();
        Ok(ControlSolution { g: self.to_trace(&g), state, adjoint, outer, hdg_solves })
    }

    /// Boundary faces in reduced-layout order.
    pub fn boundary_faces(&self) -> &[usize] {
        &self.boundary
    }

    /// Reduced-layout slice of a trace-layout vector.
    pub fn reduced(&self, trace: &[f64]) -> Vec<f64> {
        let m = self.m();
        self.boundary.iter().flat_map(|&f| trace[f * m..(f + 1) * m].iter().copied()).collect()
    }
}

/// Solve the discrete optimality system.
fn sum(a: &FieldSolution, b: &FieldSolution) -> FieldSolution {
    let add = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p + q).collect();
    FieldSolution {
        degree: a.degree,
        q: add(&a.q, &b.q),
        u: add(&a.u, &b.u),
        trace: add(&a.trace, &b.trace),
        ustar: None,
        stats: a.stats,
    }
}

pub fn solve_control(mesh: &Mesh, data: &ControlProblemData) -> Result<ControlSolution> {
    ControlSolver::new(mesh, data)?.solve_optimum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{constant_scalar, scalar_fn};
    use crate::mesh::{build_unit_square, Diagonal};
    use crate::problems::{example2_adjoint, example2_state};

    #[test]
    fn example2_data_is_consistent() {
        let data = manufactured_control_data(&example2_state(), &example2_adjoint(), 1.0, Domain::UnitSquare).unwrap();
        let pi = core::f64::consts::PI;
        let x = [0.3, 0.6];
        let s = libm::sin(pi * x[0]) + libm::sin(pi * x[1]);
        assert!(((data.f)(x) + pi.powi(3) * s).abs() < 1e-12);
        let z = libm::sin(pi * x[0]) * libm::sin(pi * x[1]);
        assert!(((data.u_d)(x) - (-pi * s - 2.0 * pi * pi * z)).abs() < 1e-12);
        for i in 0..100 {
            let y = (i as f64 + 0.5) / 100.0;
            let g = data.exact_control([0.0, y], [-1.0, 0.0]).unwrap();
            assert!((g + pi * libm::sin(pi * y)).abs() < 1e-12);
        }
    }

    #[test]
    fn inconsistent_data_is_rejected() {
        let one = Manufactured::new(|_| 1.0, |_| [0.0, 0.0], |_| 0.0);
        let err = manufactured_control_data(&one, &example2_adjoint(), 1.0, Domain::UnitSquare);
        assert!(matches!(err, Err(Error::InconsistentManufacturedData { .. })));
        let zero = Manufactured::new(|_| 0.0, |_| [0.0, 0.0], |_| 0.0);
        let d = manufactured_control_data(&zero, &zero, 1.0, Domain::UnitSquare).unwrap();
        assert_eq!((d.f)([0.2, 0.3]), 0.0);
        assert_eq!((d.u_d)([0.2, 0.3]), 0.0);
        assert!(manufactured_control_data(&zero, &zero, 0.0, Domain::UnitSquare).is_err());
    }

    #[test]
    fn zero_data_gives_zero_control() {
        let mesh = build_unit_square(4, Diagonal::Right).unwrap();
        let data = ControlProblemData::new(constant_scalar(0.0), constant_scalar(0.0), 1.0, 1);
        let sol = solve_control(&mesh, &data).unwrap();
        assert!(sol.g.iter().chain(&sol.state.u).chain(&sol.adjoint.u).all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn reduced_operator_is_symmetric_and_residual_small() {
        let mesh = build_unit_square(4, Diagonal::Left).unwrap();
        let data = ControlProblemData::new(
            scalar_fn(|x| libm::sin(3.0 * x[0]) + x[1]),
            scalar_fn(|x| x[0] * x[1]),
            0.5,
            1,
        );
        let solver = ControlSolver::new(&mesh, &data).unwrap();
        let n = solver.dim();
        let a: Vec<f64> = (0..n).map(|i| libm::sin(i as f64 * 1.7)).collect();
        let b: Vec<f64> = (0..n).map(|i| libm::cos(i as f64 * 0.3 + 1.0)).collect();
        let ha = solver.apply_reduced(&a).unwrap();
        let hb = solver.apply_reduced(&b).unwrap();
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
        let (ab, ba) = (dot(&a, &hb), dot(&b, &ha));
        assert!((ab - ba).abs() < 1e-10 * ab.abs().max(1.0), "{ab} {ba}");
        assert!(dot(&a, &ha) > 0.0);

        let sol = solver.solve_optimum().unwrap();
        let g = solver.reduced(&sol.g);
        let r = solver.optimality_residual(&g, &sol.adjoint);
        let scale = solver.reduced_rhs().unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(r.iter().all(|v| v.abs() <= 1e-9 * scale), "{r:?}");
    }
}
