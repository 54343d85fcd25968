//! Randomized structural properties of the discretization.

use hdglab_core::hdg_local::hdg_project;
use hdglab_core::hdg_solver::{assemble_skeleton, solve_poisson, ProblemData};
use hdglab_core::linalg::spd_solve_from;
use hdglab_core::postprocess::postprocess;
use hdglab_core::verify::{
    bilinear_form, conservation_defects, energy, flat_len, flux_jump_residual, from_flat, galerkin_residual,
    negate_scalars,
};
use hdglab_core::{
    scalar_fn, AffineMap, CgOptions, Coefficient, DenseMatrix, Diagonal, Domain, Mesh, ReferenceElement,
    SparseSymmetric, Stabilization,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn diagonal() -> impl Strategy<Value = Diagonal> {
    prop_oneof![Just(Diagonal::Right), Just(Diagonal::Left)]
}

fn domain() -> impl Strategy<Value = Domain> {
    prop_oneof![Just(Domain::UnitSquare), Just(Domain::LShape)]
}

// SPD constant tensor from a lower factor with positive diagonal
fn coefficient() -> impl Strategy<Value = Coefficient> {
    (0.5..2.0f64, -0.5..0.5f64, 0.5..2.0f64)
        .prop_map(|(a, b, d)| Coefficient::Constant([[a * a, a * b], [a * b, b * b + d * d]]))
}

fn random_triple(rng: &mut StdRng, mesh: &Mesh, k: usize) -> hdglab_core::FieldSolution {
    let x: Vec<f64> = (0..flat_len(mesh, k)).map(|_| rng.random_range(-1.0..1.0)).collect();
    from_flat(mesh, k, &x)
}

fn random_tau(rng: &mut StdRng, mesh: &Mesh) -> Stabilization {
    Stabilization::PerFace((0..mesh.num_faces()).map(|_| rng.random_range(0.2..5.0)).collect())
}

/// Monomial coefficients of a polynomial of total degree `k`.
fn poly_coeffs(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, (k + 1) * (k + 2) / 2)
}

fn monomials(k: usize) -> Vec<(i32, i32)> {
    (0..=k as i32).flat_map(|d| (0..=d).map(move |j| (d - j, j))).collect()
}

fn poly(k: usize, c: &[f64], x: [f64; 2]) -> f64 {
    monomials(k).iter().zip(c).map(|(&(a, b), ci)| ci * x[0].powi(a) * x[1].powi(b)).sum()
}

fn poly_grad(k: usize, c: &[f64], x: [f64; 2]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (&(a, b), ci) in monomials(k).iter().zip(c) {
        if a > 0 {
            g[0] += ci * a as f64 * x[0].powi(a - 1) * x[1].powi(b);
        }
        if b > 0 {
            g[1] += ci * b as f64 * x[0].powi(a) * x[1].powi(b - 1);
        }
    }
    g
}

fn poly_laplacian(k: usize, c: &[f64], x: [f64; 2]) -> f64 {
    let mut l = 0.0;
    for (&(a, b), ci) in monomials(k).iter().zip(c) {
        if a > 1 {
            l += ci * (a * (a - 1)) as f64 * x[0].powi(a - 2) * x[1].powi(b);
        }
        if b > 1 {
            l += ci * (b * (b - 1)) as f64 * x[0].powi(a) * x[1].powi(b - 2);
        }
    }
    l
}

fn smooth_data(k: usize, c: Coefficient, tau: Stabilization) -> ProblemData {
    ProblemData {
        c,
        f: scalar_fn(|x| (3.0 * x[0]).cos() + x[0] * x[1]),
        g: scalar_fn(|x| (x[0] + 2.0 * x[1]).sin()),
        tau,
        degree: k,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_identity_and_symmetry(seed in any::<u64>(), k in 0usize..=3, c in coefficient(), diag in diagonal()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mesh = Domain::UnitSquare.build(2, diag).unwrap();
        let reference = ReferenceElement::new(k).unwrap();
        let tau = random_tau(&mut rng, &mesh);
        let a = random_triple(&mut rng, &mesh, k);
        let b = random_triple(&mut rng, &mesh, k);
        let e = energy(&mesh, &reference, &c, &tau, &a);
        let bq = bilinear_form(&mesh, &reference, &c, &tau, &a, &negate_scalars(&a));
        prop_assert!(e > 0.0);
        prop_assert!((bq - e).abs() <= 1e-12 * e.max(1.0), "energy {e} vs {bq}");
        let ab = bilinear_form(&mesh, &reference, &c, &tau, &a, &b);
        let ba = bilinear_form(&mesh, &reference, &c, &tau, &b, &a);
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0), "{ab} vs {ba}");
    }

    #[test]
    fn solver_reproduces_polynomials(k in 1usize..=2, coeffs in poly_coeffs(2), n in 2usize..=4, diag in diagonal(), dom in domain(), tau in 0.3..4.0f64) {
        let n = if dom == Domain::LShape { 2 * n } else { n };
        let mesh = dom.build(n, diag).unwrap();
        let c: Vec<f64> = coeffs.iter().take((k + 1) * (k + 2) / 2).copied().collect();
        let (cu, cl) = (c.clone(), c.clone());
        let data = ProblemData {
            c: Coefficient::Identity,
            f: scalar_fn(move |x| -poly_laplacian(k, &cl, x)),
            g: scalar_fn(move |x| poly(k, &cu, x)),
            tau: Stabilization::Constant(tau),
            degree: k,
        };
        let sol = solve_poisson(&mesh, &data).unwrap();
        let reference = ReferenceElement::new(k).unwrap();
        for e in 0..mesh.num_elements() {
            let map = AffineMap::new(mesh.element_vertices(e));
            for xi in [[0.0, 0.0], [1.0, 0.0], [0.2, 0.7], [1.0 / 3.0, 1.0 / 3.0]] {
                let x = map.to_physical(xi);
                prop_assert!((sol.u_at(&reference, e, xi) - poly(k, &c, x)).abs() <= 1e-9);
                let (qh, g) = (sol.q_at(&reference, e, xi), poly_grad(k, &c, x));
                prop_assert!((qh[0] + g[0]).abs() <= 1e-9 && (qh[1] + g[1]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn local_conservation_and_flux_continuity(seed in any::<u64>(), k in 0usize..=2, c in coefficient(), dom in domain(), diag in diagonal()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mesh = dom.build(4, diag).unwrap();
        let tau = random_tau(&mut rng, &mesh);
        let data = smooth_data(k, c, tau);
        let sol = solve_poisson(&mesh, &data).unwrap();
        let reference = ReferenceElement::new(k).unwrap();
        let defects = conservation_defects(&mesh, &reference, &data.tau, &*data.f, &sol);
        prop_assert!(defects.iter().all(|d| d.abs() <= 1e-10), "{defects:?}");
        prop_assert!(flux_jump_residual(&mesh, &reference, &data.tau, &sol) <= 1e-10);
    }

    #[test]
    fn condensed_solution_satisfies_galerkin_equations(k in 0usize..=2, c in coefficient(), diag in diagonal(), tau in 0.3..4.0f64) {
        let mesh = Domain::UnitSquare.build(2, diag).unwrap();
        let data = smooth_data(k, c, Stabilization::Constant(tau));
        let sol = solve_poisson(&mesh, &data).unwrap();
        prop_assert!(galerkin_residual(&mesh, &data, &sol).unwrap() <= 1e-10);
    }

    #[test]
    fn skeleton_matrix_is_positive_definite(seed in any::<u64>(), k in 0usize..=2, c in coefficient(), dom in domain()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mesh = dom.build(2, Diagonal::Right).unwrap();
        let tau = random_tau(&mut rng, &mesh);
        let sk = assemble_skeleton(&mesh, &smooth_data(k, c, tau)).unwrap();
        let a = sk.matrix.to_dense();
        let n = a.rows();
        for i in 0..n {
            for j in 0..i {
                prop_assert_eq!(a[(i, j)], a[(j, i)]);
            }
        }
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ax = sk.matrix.matvec(&x);
        prop_assert!(x.iter().zip(&ax).map(|(p, q)| p * q).sum::<f64>() > 0.0);
    }

    #[test]
    fn cg_agrees_with_dense_lu(seed in any::<u64>(), n in 1usize..40) {
        let mut rng = StdRng::seed_from_u64(seed);
        // A = Bᵀ B + I, with B banded for sparsity
        let mut dense = DenseMatrix::zeros(n, n);
        for i in 0..n {
            dense[(i, i)] += 1.0;
        }
        let mut b = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(2)..=i {
                b[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        for i in 0..n {
            for j in 0..n {
                dense[(i, j)] += (0..n).map(|r| b[(r, i)] * b[(r, j)]).sum::<f64>();
            }
        }
        let a = SparseSymmetric::from_dense_lower(&dense);
        let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (x, _) = spd_solve_from(&a, &rhs, None, &CgOptions::default()).unwrap();
        let y = dense.lu().unwrap().solve(&rhs);
        for (p, q) in x.iter().zip(&y) {
            prop_assert!((p - q).abs() <= 1e-9 * q.abs().max(1.0));
        }
    }

    #[test]
    fn projection_reproduces_polynomial_pairs(k in 0usize..=3, cu in poly_coeffs(3), cq in poly_coeffs(3), seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mesh = Domain::UnitSquare.build(2, Diagonal::Left).unwrap();
        let reference = ReferenceElement::new(k).unwrap();
        let tau = random_tau(&mut rng, &mesh);
        let m = (k + 1) * (k + 2) / 2;
        let (cu, cq) = (cu[..m].to_vec(), cq[..m].to_vec());
        let u = |x: [f64; 2]| poly(k, &cu, x);
        let q = |x: [f64; 2]| [poly(k, &cq, x), -poly(k, &cu, [x[1], x[0]])];
        let n = reference.dim();
        let mut phi = vec![0.0; n];
        for e in 0..mesh.num_elements() {
            let (qc, uc) = hdg_project(&mesh, e, &reference, &tau, &q, &u).unwrap();
            let map = AffineMap::new(mesh.element_vertices(e));
            for xi in [[0.1, 0.1], [0.6, 0.3], [0.0, 1.0]] {
                reference.basis_at(xi, &mut phi);
                let dot = |c: &[f64]| phi.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
                let x = map.to_physical(xi);
                prop_assert!((dot(&uc) - u(x)).abs() <= 1e-10);
                prop_assert!((dot(&qc[..n]) - q(x)[0]).abs() <= 1e-10);
                prop_assert!((dot(&qc[n..]) - q(x)[1]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn postprocess_preserves_element_means(k in 0usize..=2, diag in diagonal(), tau in 0.3..4.0f64) {
        let mesh = Domain::LShape.build(4, diag).unwrap();
        let data = smooth_data(k, Coefficient::Identity, Stabilization::Constant(tau));
        let sol = solve_poisson(&mesh, &data).unwrap();
        let reference = ReferenceElement::new(k).unwrap();
        let star = ReferenceElement::new(k + 1).unwrap();
        let post = postprocess(&mesh, &reference, &star, &sol, &data.c).unwrap();
        let rule = star.triangle_rule();
        for e in 0..mesh.num_elements() {
            let mean: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(&xi, &w)| 2.0 * w * (post.ustar_at(&star, e, xi).unwrap() - post.u_at(&reference, e, xi)))
                .sum();
            prop_assert!(mean.abs() <= 1e-12);
        }
    }

    #[test]
    fn mesh_topology(n in 1usize..12, diag in diagonal(), lshape in any::<bool>()) {
        let (dom, n) = if lshape { (Domain::LShape, 2 * n) } else { (Domain::UnitSquare, n) };
        let mesh = dom.build(n, diag).unwrap();
        // Euler characteristic of a simply connected planar triangulation
        let (v, f, t) = (mesh.vertices.len() as i64, mesh.num_faces() as i64, mesh.num_elements() as i64);
        prop_assert_eq!(v - f + t, 1);
        let area: f64 = (0..mesh.num_elements()).map(|e| mesh.element_area(e)).sum();
        prop_assert!((area - dom.area()).abs() <= 1e-12);
        let perimeter: f64 = mesh.boundary_faces().iter().map(|&f| mesh.faces[f].length).sum();
        prop_assert!((perimeter - dom.perimeter()).abs() <= 1e-12);
        for face in &mesh.faces {
            prop_assert!((face.normal[0].hypot(face.normal[1]) - 1.0).abs() <= 1e-14);
        }
        // outward normals of each element integrate to zero around its boundary
        for e in 0..mesh.num_elements() {
            let mut s = [0.0; 2];
            for le in 0..3 {
                let nrm = mesh.outward_normal(e, le);
                let len = mesh.faces[mesh.element_faces[e][le].face].length;
                s[0] += len * nrm[0];
                s[1] += len * nrm[1];
            }
            prop_assert!(s[0].abs() <= 1e-13 && s[1].abs() <= 1e-13);
        }
    }
}
