//! Property suite that needs no table data. Each check returns the worst
//! observed defect next to its tolerance.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use hdglab_core::control::{ControlProblemData, ControlSolver};
use hdglab_core::hdg_local::{hdg_project, Stabilization};
use hdglab_core::hdg_solver::{solve_poisson, ProblemData};
use hdglab_core::postprocess::postprocess;
use hdglab_core::quadrature::{reference_monomial_integral, triangle_quadrature, MAX_TRIANGLE_DEGREE};
use hdglab_core::verify::{
    bilinear_form, conservation_defects, dense_uncondensed_solve, energy, flat_len, from_flat, negate_scalars,
};
use hdglab_core::{scalar_fn, AffineMap, Coefficient, Diagonal, Domain, ReferenceElement};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub defect: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.defect <= self.tolerance
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<34} defect {:.3e} (tol {:.0e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.defect,
            self.tolerance
        )
    }
}

fn check(name: &'static str, defect: hdglab_core::Result<f64>, tolerance: f64) -> Check {
    Check { name, defect: defect.unwrap_or(f64::INFINITY), tolerance }
}

/// Reference-triangle rule vs. `a! b! / (a + b + 2)!`, relative.
pub fn quadrature_exactness() -> hdglab_core::Result<f64> {
    let mut worst = 0.0f64;
    for d in 0..=MAX_TRIANGLE_DEGREE {
        let rule = triangle_quadrature(d)?;
        for a in 0..=d {
            for b in 0..=d - a {
                let got: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum();
                let exact = reference_monomial_integral(a as u32, b as u32);
                worst = worst.max((got - exact).abs() / exact);
            }
        }
    }
    Ok(worst)
}

fn random_triple(rng: &mut StdRng, mesh: &hdglab_core::Mesh, k: usize) -> hdglab_core::FieldSolution {
    let x: Vec<f64> = (0..flat_len(mesh, k)).map(|_| rng.random_range(-1.0..1.0)).collect();
    from_flat(mesh, k, &x)
}

fn test_coefficient() -> Coefficient {
    Coefficient::Constant([[2.0, 0.3], [0.3, 1.0]])
}

/// `B(x; q,−u,−û)` against the energy, and `B(x; y) − B(y; x)`, relative,
/// on random triples.
pub fn energy_and_symmetry(samples: usize) -> hdglab_core::Result<(f64, f64)> {
    let mut rng = StdRng::seed_from_u64(2024);
    let mesh = hdglab_core::Mesh::from_triangles(
        vec![[0.0, 0.0], [1.0, 0.1], [0.2, 0.9], [1.1, 1.0]],
        vec![[0, 1, 2], [1, 3, 2]],
    )?;
    let c = test_coefficient();
    let (mut de, mut ds) = (0.0f64, 0.0f64);
    for s in 0..samples {
        let k = s % 3 + 1;
        let reference = ReferenceElement::new(k)?;
        let tau = Stabilization::PerFace((0..mesh.num_faces()).map(|_| rng.random_range(0.5..4.0)).collect());
        let x = random_triple(&mut rng, &mesh, k);
        let y = random_triple(&mut rng, &mesh, k);
        let b = bilinear_form(&mesh, &reference, &c, &tau, &x, &negate_scalars(&x));
        let e = energy(&mesh, &reference, &c, &tau, &x);
        de = de.max((b - e).abs() / e.abs().max(1.0));
        let bxy = bilinear_form(&mesh, &reference, &c, &tau, &x, &y);
        let byx = bilinear_form(&mesh, &reference, &c, &tau, &y, &x);
        ds = ds.max((bxy - byx).abs() / bxy.abs().max(1.0));
    }
    Ok((de, ds))
}

/// HDG projection of polynomial `(q, u) ∈ [P^k]² × P^k` reproduces them;
/// coefficient error.
pub fn projection_reproduction() -> hdglab_core::Result<f64> {
    let mesh = Domain::UnitSquare.build(2, Diagonal::Left)?;
    let mut worst = 0.0f64;
    for k in 0..=3 {
        let reference = ReferenceElement::new(k)?;
        let kf = k as f64;
        let u = move |x: [f64; 2]| 0.5 + kf.min(1.0) * (x[0] - 2.0 * x[1]) + (kf - 1.0).max(0.0) * x[0] * x[1];
        let q = move |x: [f64; 2]| [kf.min(1.0) * (1.0 + x[1]), 0.3 - kf.min(1.0) * x[0]];
        for e in 0..mesh.num_elements() {
            let (qc, uc) = hdg_project(&mesh, e, &reference, &Stabilization::Constant(1.0), &q, &u)?;
            let map = AffineMap::new(mesh.element_vertices(e));
            let n = reference.dim();
            let mut phi = vec![0.0; n];
            for xi in [[0.2, 0.2], [0.7, 0.1], [0.0, 1.0]] {
                reference.basis_at(xi, &mut phi);
                let dot = |c: &[f64]| phi.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
                let x = map.to_physical(xi);
                worst = worst.max((dot(&uc) - u(x)).abs());
                worst = worst.max((dot(&qc[..n]) - q(x)[0]).abs()).max((dot(&qc[n..]) - q(x)[1]).abs());
            }
        }
    }
    Ok(worst)
}

/// Residuals of the HDG projection's defining moments for a smooth field.
pub fn projection_moments() -> hdglab_core::Result<f64> {
    let mesh = Domain::UnitSquare.build(2, Diagonal::Right)?;
    let u = |x: [f64; 2]| (3.0 * x[0]).sin() * (x[1] + 0.5).exp();
    let q = |x: [f64; 2]| [(2.0 * x[1]).cos(), x[0] * x[0] - x[1]];
    let mut worst = 0.0f64;
    for k in 1..=3 {
        let reference = ReferenceElement::new(k)?;
        let tau = 2.5;
        let n = reference.dim();
        let low = hdglab_core::basis::triangle_dim(k - 1);
        for e in 0..mesh.num_elements() {
            let (qc, uc) = hdg_project(&mesh, e, &reference, &Stabilization::Constant(tau), &q, &u)?;
            let map = AffineMap::new(mesh.element_vertices(e));
            let det = map.det.abs();
            let rule = reference.triangle_rule();
            let mut phi = vec![0.0; n];
            let mut vol = vec![0.0; 3 * low];
            for (&xi, &w) in rule.points.iter().zip(&rule.weights) {
                reference.basis_at(xi, &mut phi);
                let dot = |c: &[f64]| phi.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
                let x = map.to_physical(xi);
                let (dq, du) = ([dot(&qc[..n]) - q(x)[0], dot(&qc[n..]) - q(x)[1]], dot(&uc) - u(x));
                for i in 0..low {
                    vol[i] += w * det * dq[0] * phi[i];
                    vol[low + i] += w * det * dq[1] * phi[i];
                    vol[2 * low + i] += w * det * du * phi[i];
                }
            }
            worst = vol.iter().fold(worst, |m, v| m.max(v.abs()));
            let edge = reference.edge_rule();
            let mut mu = vec![0.0; k + 1];
            for ef in &mesh.element_faces[e] {
                let face = &mesh.faces[ef.face];
                let nrm = [ef.sign() * face.normal[0], ef.sign() * face.normal[1]];
                let [p0, p1] = mesh.face_endpoints(ef.face);
                let mut m = vec![0.0; k + 1];
                for (&s, &w) in edge.points.iter().zip(&edge.weights) {
                    let x = [p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1])];
                    reference.basis_at(map.to_reference(x), &mut phi);
                    let dot = |c: &[f64]| phi.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
                    let dq = [dot(&qc[..n]) - q(x)[0], dot(&qc[n..]) - q(x)[1]];
                    let d = dq[0] * nrm[0] + dq[1] * nrm[1] + tau * (dot(&uc) - u(x));
                    hdglab_core::basis::edge_basis_at(k, s, &mut mu);
                    for (mi, b) in m.iter_mut().zip(&mu) {
                        *mi += w * face.length * d * b;
                    }
                }
                worst = m.iter().fold(worst, |a, v| a.max(v.abs()));
            }
        }
    }
    Ok(worst)
}

/// Solver reproduces `u ∈ P^k` (and `q = −c∇u`) at sample points.
pub fn polynomial_exactness() -> hdglab_core::Result<f64> {
    let mut worst = 0.0f64;
    for (k, diag) in [(1, Diagonal::Right), (2, Diagonal::Left), (3, Diagonal::Right)] {
        let mesh = Domain::UnitSquare.build(3, diag)?;
        let u = move |x: [f64; 2]| match k {
            1 => 1.0 + 2.0 * x[0] - x[1],
            2 => x[0] * x[0] - 3.0 * x[0] * x[1] + x[1],
            _ => x[0] * x[0] * x[0] - x[1] * x[1] * x[0] + 0.5,
        };
        let lap = move |x: [f64; 2]| match k {
            1 => 0.0,
            2 => 2.0,
            _ => 6.0 * x[0] - 2.0 * x[0],
        };
        let data = ProblemData {
            c: Coefficient::Identity,
            f: scalar_fn(move |x| -lap(x)),
            g: scalar_fn(u),
            tau: Stabilization::Constant(1.0),
            degree: k,
        };
        let sol = solve_poisson(&mesh, &data)?;
        let reference = ReferenceElement::new(k)?;
        for e in 0..mesh.num_elements() {
            let map = AffineMap::new(mesh.element_vertices(e));
            for xi in [[0.1, 0.3], [0.5, 0.5], [0.0, 0.0]] {
                worst = worst.max((sol.u_at(&reference, e, xi) - u(map.to_physical(xi))).abs());
            }
        }
    }
    Ok(worst)
}

fn smooth_problem(k: usize, c: Coefficient) -> ProblemData {
    ProblemData {
        c,
        f: scalar_fn(|x| (4.0 * x[0]).sin() + x[1] * x[1]),
        g: scalar_fn(|x| (x[0] - x[1]).exp()),
        tau: Stabilization::Constant(1.5),
        degree: k,
    }
}

/// `max_K |⟨q̂·n, 1⟩_{∂K} − (f, 1)_K|`.
pub fn local_conservation() -> hdglab_core::Result<f64> {
    let mut worst = 0.0f64;
    for k in 0..=2 {
        let mesh = Domain::LShape.build(4, Diagonal::Right)?;
        let data = smooth_problem(k, test_coefficient());
        let sol = solve_poisson(&mesh, &data)?;
        let reference = ReferenceElement::new(k)?;
        let d = conservation_defects(&mesh, &reference, &data.tau, &*data.f, &sol);
        worst = d.iter().fold(worst, |m, v| m.max(v.abs()));
    }
    Ok(worst)
}

/// Condensed CG solve vs. dense uncondensed LU on `n = 2`.
pub fn dense_oracle() -> hdglab_core::Result<f64> {
    let mut worst = 0.0f64;
    for k in 1..=2 {
        let mesh = Domain::UnitSquare.build(2, Diagonal::Right)?;
        let data = smooth_problem(k, test_coefficient());
        let a = dense_uncondensed_solve(&mesh, &data)?;
        let b = solve_poisson(&mesh, &data)?;
        let pairs = a.q.iter().zip(&b.q).chain(a.u.iter().zip(&b.u)).chain(a.trace.iter().zip(&b.trace));
        worst = pairs.fold(worst, |m, (x, y)| m.max((x - y).abs()));
    }
    Ok(worst)
}

/// `|(u_h^⋆ − u_h, 1)_K| / |K|`.
pub fn postprocess_mean() -> hdglab_core::Result<f64> {
    let mut worst = 0.0f64;
    for k in 0..=2 {
        let mesh = Domain::UnitSquare.build(4, Diagonal::Left)?;
        let data = smooth_problem(k, Coefficient::Identity);
        let sol = solve_poisson(&mesh, &data)?;
        let reference = ReferenceElement::new(k)?;
        let star = ReferenceElement::new(k + 1)?;
        let post = postprocess(&mesh, &reference, &star, &sol, &data.c)?;
        let rule = star.triangle_rule();
        for e in 0..mesh.num_elements() {
            // reference weights sum to 1/2, so 2 Σ w d is the element mean
            let mut diff = 0.0;
            for (&xi, &w) in rule.points.iter().zip(&rule.weights) {
                diff += w * 2.0 * (post.ustar_at(&star, e, xi).unwrap_or(f64::NAN) - post.u_at(&reference, e, xi));
            }
            worst = worst.max(diff.abs());
        }
    }
    Ok(worst)
}

fn control_data() -> ControlProblemData {
    ControlProblemData::new(
        scalar_fn(|x| 5.0 * (2.0 * x[0]).sin() * x[1]),
        scalar_fn(|x| x[0] - x[1] * x[1]),
        0.1,
        1,
    )
}

/// Optimality residual relative to the reduced right-hand side, and the
/// largest objective decrease found among 20 perturbations of size `1e-3`
/// (positive means a perturbation improved `J`).
pub fn control_checks() -> hdglab_core::Result<(f64, f64)> {
    let mesh = Domain::UnitSquare.build(4, Diagonal::Right)?;
    let data = control_data();
    let solver = ControlSolver::new(&mesh, &data)?;
    let sol = solver.solve_optimum()?;
    let g = solver.reduced(&sol.g);
    let rhs = solver.reduced_rhs()?;
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let res = solver.optimality_residual(&g, &sol.adjoint);
    let residual = res.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;

    let j0 = solver.objective(&g, &*data.u_d)?;
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst_gain = f64::NEG_INFINITY;
    for _ in 0..20 {
        let mut d: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        d.iter_mut().for_each(|v| *v *= 1e-3 / norm);
        let gp: Vec<f64> = g.iter().zip(&d).map(|(a, b)| a + b).collect();
        worst_gain = worst_gain.max(j0 - solver.objective(&gp, &*data.u_d)?);
    }
    Ok((residual, worst_gain))
}

/// All checks, in a fixed order.
pub fn run_all() -> Vec<Check> {
    let mut out = vec![check("quadrature exactness", quadrature_exactness(), 1e-13)];
    let (energy, symmetry) = energy_and_symmetry(30).unwrap_or((f64::INFINITY, f64::INFINITY));
    out.push(Check { name: "energy identity", defect: energy, tolerance: 1e-12 });
    out.push(Check { name: "symmetry of B", defect: symmetry, tolerance: 1e-12 });
    out.push(check("HDG projection reproduction", projection_reproduction(), 1e-12));
    out.push(check("HDG projection moments", projection_moments(), 1e-10));
    out.push(check("solver polynomial exactness", polynomial_exactness(), 1e-9));
    out.push(check("local conservation", local_conservation(), 1e-10));
    out.push(check("dense oracle equivalence", dense_oracle(), 1e-8));
    out.push(check("postprocess mean preservation", postprocess_mean(), 1e-12));
    let (residual, gain) = control_checks().unwrap_or((f64::INFINITY, f64::INFINITY));
    out.push(Check { name: "control optimality residual", defect: residual, tolerance: 1e-9 });
    // J is quadratic with an SPD Hessian: no perturbation may lower it
    out.push(Check { name: "control objective descent", defect: gain.max(0.0), tolerance: 0.0 });
    out
}
