//! Global skeleton assembly, Dirichlet data and elementwise recovery.

use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{edge_basis_at, ReferenceElement};
use crate::error::{Error, Result};
use crate::fields::{Coefficient, ScalarFn};
use crate::hdg_local::{
    l2_project_face, load_on_map, local_operators_from_geometry, recovery, schur_complement, ElementGeometry, Recovery,
    Stabilization,
};
use crate::linalg::{spd_solve_from, CgOptions, CgReport, DenseMatrix, SparseSymmetric};
use crate::mesh::{Mesh, Point};
use crate::par::try_map_indices;

/// Data of `c q + ∇u = 0`, `∇·q = f` in `Ω`, `u = g` on `∂Ω`.
#[derive(Clone)]
pub struct ProblemData {
    pub c: Coefficient,
    pub f: ScalarFn,
    pub g: ScalarFn,
    pub tau: Stabilization,
    pub degree: usize,
}

/// Discrete HDG fields `(q_h, u_h, û_h)` and optionally `u_h^⋆`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldSolution {
    pub degree: usize,
    /// Per element `2 dim P^k`: `x` components then `y` components.
    pub q: Vec<f64>,
    /// Per element `dim P^k`.
    pub u: Vec<f64>,
    /// Per face `k + 1`, canonical face orientation; boundary faces carry the
    /// imposed Dirichlet trace.
    pub trace: Vec<f64>,
    /// Per element `dim P^{k+1}`, filled by [`crate::postprocess::postprocess`].
    pub ustar: Option<Vec<f64>>,
    pub stats: CgReport,
}

impl FieldSolution {
    pub fn zeros(mesh: &Mesh, degree: usize) -> Self {
        let n = crate::basis::triangle_dim(degree);
        FieldSolution {
            degree,
            q: vec![0.0; 2 * n * mesh.num_elements()],
            u: vec![0.0; n * mesh.num_elements()],
            trace: vec![0.0; (degree + 1) * mesh.num_faces()],
            ustar: None,
            stats: CgReport::default(),
        }
    }

    fn dim(&self) -> usize {
        crate::basis::triangle_dim(self.degree)
    }

    pub fn q_on(&self, e: usize) -> &[f64] {
        let n = self.dim();
        &self.q[2 * n * e..2 * n * (e + 1)]
    }

    pub fn u_on(&self, e: usize) -> &[f64] {
        let n = self.dim();
        &self.u[n * e..n * (e + 1)]
    }

    pub fn trace_on(&self, f: usize) -> &[f64] {
        let m = self.degree + 1;
        &self.trace[m * f..m * (f + 1)]
    }

    pub fn ustar_on(&self, e: usize) -> Option<&[f64]> {
        let n1 = crate::basis::triangle_dim(self.degree + 1);
        self.ustar.as_ref().map(|s| &s[n1 * e..n1 * (e + 1)])
    }

    /// `u_h` on element `e` at reference point `xi`.
    pub fn u_at(&self, reference: &ReferenceElement, e: usize, xi: Point) -> f64 {
        combine(reference, self.u_on(e), xi)
    }

    /// `q_h` on element `e` at reference point `xi`.
    pub fn q_at(&self, reference: &ReferenceElement, e: usize, xi: Point) -> [f64; 2] {
        let n = self.dim();
        let mut phi = vec![0.0; n];
        reference.basis_at(xi, &mut phi);
        let q = self.q_on(e);
        let dot = |c: &[f64]| phi.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
        [dot(&q[..n]), dot(&q[n..])]
    }

    /// `u_h^⋆` on element `e`; `reference` must have degree `k + 1`.
    pub fn ustar_at(&self, reference: &ReferenceElement, e: usize, xi: Point) -> Option<f64> {
        self.ustar_on(e).map(|c| combine(reference, c, xi))
    }

    /// `û_h` on face `f` at canonical parameter `s ∈ [0,1]`.
    pub fn trace_at(&self, f: usize, s: f64) -> f64 {
        let m = self.degree + 1;
        let mut mu = vec![0.0; m];
        edge_basis_at(self.degree, s, &mut mu);
        mu.iter().zip(self.trace_on(f)).map(|(a, b)| a * b).sum()
    }
}

pub(crate) fn combine(reference: &ReferenceElement, coeffs: &[f64], xi: Point) -> f64 {
    let mut phi = vec![0.0; reference.dim()];
    reference.basis_at(xi, &mut phi);
    phi.iter().zip(coeffs).map(|(a, b)| a * b).sum()
}

/// Global numbering of trace unknowns: `k + 1` per interior face, faces in
/// mesh order. Boundary faces carry no unknowns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofMap {
    per_face: usize,
    slots: Vec<Option<usize>>,
    count: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh, degree: usize) -> Self {
        let mut count = 0;
        let slots = mesh
            .faces
            .iter()
            .map(|f| {
                if f.is_boundary() {
                    None
                } else {
                    count += 1;
                    Some(count - 1)
                }
            })
            .collect();
        DofMap { per_face: degree + 1, slots, count }
    }

    pub fn dim(&self) -> usize {
        self.count * self.per_face
    }

    pub fn per_face(&self) -> usize {
        self.per_face
    }

    /// Index of the first unknown of `face`, or `None` on the boundary.
    pub fn first_dof(&self, face: usize) -> Option<usize> {
        self.slots[face].map(|s| s * self.per_face)
    }
}

/// Condensed skeleton system `S û = rhs` on interior faces.
#[derive(Clone, Debug)]
pub struct SkeletonSystem {
    pub matrix: SparseSymmetric,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
}

#[derive(Clone, Debug)]
struct ElementSystem {
    faces: [usize; 3],
    schur: DenseMatrix,
    recovery: Recovery,
}

/// Reusable HDG discretization for a fixed mesh, degree, `c` and `τ`: element
/// factorizations and the assembled skeleton matrix are built once, then any
/// number of loads and Dirichlet traces can be solved.
pub struct HdgSystem<'m> {
    mesh: &'m Mesh,
    reference: ReferenceElement,
    tau: Stabilization,
    elements: Vec<ElementSystem>,
    dofs: DofMap,
    matrix: SparseSymmetric,
    pub cg: CgOptions,
}

impl<'m> HdgSystem<'m> {
    pub fn new(mesh: &'m Mesh, reference: ReferenceElement, c: &Coefficient, tau: Stabilization) -> Result<Self> {
        tau.validate(mesh)?;
        let elements = try_map_indices(mesh.num_elements(), |e| -> Result<ElementSystem> {
            let geom = ElementGeometry::new(mesh, &reference, e, &tau)?;
            let ops = local_operators_from_geometry(&geom, e, &reference, c);
            let rec = recovery(&ops)?;
            let schur = schur_complement(&ops, &rec);
            if schur.asymmetry() > 1e-12 * schur.max_abs().max(1.0) {
                return Err(Error::invalid("element Schur complement is not symmetric"));
            }
            Ok(ElementSystem { faces: ops.faces, schur, recovery: rec })
        })?;

        let dofs = DofMap::new(mesh, reference.degree());
        let m = dofs.per_face();
        let mut triplets = Vec::with_capacity(elements.len() * 9 * m * m);
        for el in &elements {
            for (a, &fa) in el.faces.iter().enumerate() {
                let Some(ra) = dofs.first_dof(fa) else { continue };
                for (b, &fb) in el.faces.iter().enumerate() {
                    let Some(rb) = dofs.first_dof(fb) else { continue };
                    for i in 0..m {
                        for j in 0..m {
                            let (gi, gj) = (ra + i, rb + j);
                            if gi >= gj {
                                triplets.push((gi, gj, el.schur[(a * m + i, b * m + j)]));
                            }
                        }
                    }
                }
            }
        }
        let matrix = SparseSymmetric::from_triplets(dofs.dim(), &triplets);
        Ok(HdgSystem { mesh, reference, tau, elements, dofs, matrix, cg: CgOptions::default() })
    }

    pub fn from_problem(mesh: &'m Mesh, data: &ProblemData) -> Result<Self> {
        let reference = ReferenceElement::new(data.degree)?;
        Self::new(mesh, reference, &data.c, data.tau.clone())
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn reference(&self) -> &ReferenceElement {
        &self.reference
    }

    pub fn stabilization(&self) -> &Stabilization {
        &self.tau
    }

    pub fn matrix(&self) -> &SparseSymmetric {
        &self.matrix
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    /// Element loads `(f, φ_i)_K`, flattened element by element.
    pub fn loads_from_fn(&self, f: &(dyn Fn(Point) -> f64 + Sync)) -> Vec<f64> {
        let mesh = self.mesh;
        let reference = &self.reference;
        crate::par::map_indices(mesh.num_elements(), |e| {
            let map = crate::basis::AffineMap::new(mesh.element_vertices(e));
            load_on_map(&map, reference, f)
        })
        .concat()
    }

    /// Full trace vector with boundary faces set to `Π_k^∂ g` and interior
    /// faces zero.
    pub fn dirichlet_trace(&self, g: &(dyn Fn(Point) -> f64 + Sync)) -> Result<Vec<f64>> {
        let m = self.reference.edge_dim();
        let mut trace = vec![0.0; m * self.mesh.num_faces()];
        for f in self.mesh.boundary_faces() {
            let c = l2_project_face(self.mesh, f, &self.reference, g)?;
            trace[f * m..(f + 1) * m].copy_from_slice(&c);
        }
        Ok(trace)
    }

    /// Condensed right-hand side for element `loads` and the boundary part of
    /// `trace`.
    pub fn rhs(&self, loads: &[f64], trace: &[f64]) -> Vec<f64> {
        let n = self.reference.dim();
        let m = self.dofs.per_face();
        let mut rhs = vec![0.0; self.dofs.dim()];
        let contributions = crate::par::map_indices(self.elements.len(), |e| {
            let el = &self.elements[e];
            let mut g = el.recovery.schur_load(&loads[e * n..(e + 1) * n]);
            for (b, &fb) in el.faces.iter().enumerate() {
                if self.dofs.first_dof(fb).is_some() {
                    continue;
                }
                for j in 0..m {
                    let t = trace[fb * m + j];
                    if t != 0.0 {
                        for (i, gi) in g.iter_mut().enumerate() {
                            *gi -= el.schur[(i, b * m + j)] * t;
                        }
                    }
                }
            }
            g
        });
        for (el, g) in self.elements.iter().zip(&contributions) {
            for (a, &fa) in el.faces.iter().enumerate() {
                if let Some(r) = self.dofs.first_dof(fa) {
                    for i in 0..m {
                        rhs[r + i] += g[a * m + i];
                    }
                }
            }
        }
        rhs
    }

    /// Solve for element `loads` (see [`Self::loads_from_fn`]) with the
    /// boundary values taken from `boundary_trace` (interior entries ignored).
    pub fn solve(&self, loads: &[f64], boundary_trace: &[f64]) -> Result<FieldSolution> {
        self.solve_from(loads, boundary_trace, None)
    }

    /// [`Self::solve`] with an initial guess for the skeleton unknowns.
    pub fn solve_from(&self, loads: &[f64], boundary_trace: &[f64], guess: Option<&[f64]>) -> Result<FieldSolution> {
        let m = self.dofs.per_face();
        if loads.len() != self.reference.dim() * self.mesh.num_elements()
            || boundary_trace.len() != m * self.mesh.num_faces()
        {
            return Err(Error::invalid("load or trace vector has the wrong length"));
        }
        let rhs = self.rhs(loads, boundary_trace);
        let (x, stats) = if rhs.is_empty() {
            (Vec::new(), CgReport::default())
        } else {
            spd_solve_from(&self.matrix, &rhs, guess, &self.cg)?
        };
        let mut trace = boundary_trace.to_vec();
        for f in 0..self.mesh.num_faces() {
            if let Some(r) = self.dofs.first_dof(f) {
                trace[f * m..(f + 1) * m].copy_from_slice(&x[r..r + m]);
            }
        }
        let mut sol = self.recover(loads, trace);
        sol.stats = stats;
        Ok(sol)
    }

    /// Skeleton unknowns of a full trace vector, in [`DofMap`] order.
    pub fn skeleton_values(&self, trace: &[f64]) -> Vec<f64> {
        let m = self.dofs.per_face();
        let mut x = vec![0.0; self.dofs.dim()];
        for f in 0..self.mesh.num_faces() {
            if let Some(r) = self.dofs.first_dof(f) {
                x[r..r + m].copy_from_slice(&trace[f * m..(f + 1) * m]);
            }
        }
        x
    }

    /// Recover `(q_h, u_h)` elementwise from a complete trace vector.
    pub fn recover(&self, loads: &[f64], trace: Vec<f64>) -> FieldSolution {
        let n = self.reference.dim();
        let m = self.dofs.per_face();
        let locals = crate::par::map_indices(self.elements.len(), |e| {
            let el = &self.elements[e];
            let mut lam = Vec::with_capacity(3 * m);
            for &f in &el.faces {
                lam.extend_from_slice(&trace[f * m..(f + 1) * m]);
            }
            el.recovery.recover(&loads[e * n..(e + 1) * n], &lam)
        });
        let mut q = Vec::with_capacity(2 * n * locals.len());
        let mut u = Vec::with_capacity(n * locals.len());
        for x in &locals {
            q.extend_from_slice(&x[..2 * n]);
            u.extend_from_slice(&x[2 * n..]);
        }
        FieldSolution { degree: self.reference.degree(), q, u, trace, ustar: None, stats: CgReport::default() }
    }
}

/// Condensed system for `data` on `mesh`, Dirichlet data moved to the
/// right-hand side.
pub fn assemble_skeleton(mesh: &Mesh, data: &ProblemData) -> Result<SkeletonSystem> {
    let system = HdgSystem::from_problem(mesh, data)?;
    let loads = system.loads_from_fn(&*data.f);
    let trace = system.dirichlet_trace(&*data.g)?;
    let rhs = system.rhs(&loads, &trace);
    Ok(SkeletonSystem { matrix: system.matrix.clone(), rhs, dofs: system.dofs.clone() })
}

/// Solve the HDG discretization of the Dirichlet problem.
pub fn solve_poisson(mesh: &Mesh, data: &ProblemData) -> Result<FieldSolution> {
    let system = HdgSystem::from_problem(mesh, data)?;
    let loads = system.loads_from_fn(&*data.f);
    let trace = system.dirichlet_trace(&*data.g)?;
    system.solve(&loads, &trace)
}
