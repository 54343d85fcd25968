//! Refinement sweeps: solve, postprocess and measure every requested quantity
//! on each level.

use std::path::PathBuf;
use std::time::Instant;

use hdglab_core::control::{manufactured_control_data, ControlSolver};
use hdglab_core::error_norms::{
    l2_error, l2_error_face_field, l2_error_interface, l2_error_interface_vector, l2_error_vector, linf_error,
    linf_error_vector,
};
use hdglab_core::postprocess::postprocess;
use hdglab_core::problems::{self, Manufactured};
use hdglab_core::quadrature::{edge_quadrature, triangle_quadrature};
use hdglab_core::{
    Coefficient, Domain, ErrorReport, FieldSolution, HdgSystem, Mesh, Quantity, ReferenceElement, SamplingSpec,
    Stabilization,
};

use crate::config::{ProblemKind, StudyConfig};
use crate::output;

/// Report of one `(problem, k)` sweep plus wall-clock time per level.
#[derive(Clone, Debug)]
pub struct DegreeStudy {
    pub degree: usize,
    pub report: ErrorReport,
    pub seconds: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct StudyOutcome {
    pub studies: Vec<DegreeStudy>,
    pub files: Vec<PathBuf>,
}

impl StudyOutcome {
    pub fn failed(&self) -> bool {
        self.studies.iter().any(|s| s.report.has_failures())
    }
}

/// Every `(Π_V q, Π_W u)`-free quantity of a Poisson solution.
pub fn measure_poisson(
    mesh: &Mesh,
    exact: &Manufactured,
    solution: &FieldSolution,
    reference: &ReferenceElement,
    reference_star: &ReferenceElement,
    quantities: &[Quantity],
) -> hdglab_core::Result<Vec<f64>> {
    let k = solution.degree;
    let sampling = SamplingSpec::standard(k);
    let volume = triangle_quadrature(2 * k + 5)?;
    let edge = edge_quadrature(2 * k + 5)?;
    let boundary = mesh.boundary_faces();
    let q = exact.flux();
    let u = exact.u.clone();
    let qh = |e: usize, xi| solution.q_at(reference, e, xi);
    let uh = |e: usize, xi| solution.u_at(reference, e, xi);
    let us = |e: usize, xi| solution.ustar_at(reference_star, e, xi).unwrap_or(f64::NAN);
    quantities
        .iter()
        .map(|&quantity| {
            Ok(match quantity {
                Quantity::QLinf => linf_error_vector(mesh, &sampling, &qh, &*q)?,
                Quantity::ULinf => linf_error(mesh, &sampling, &uh, &*u)?,
                Quantity::UstarLinf => linf_error(mesh, &SamplingSpec::standard(k + 1), &us, &*u)?,
                Quantity::QL2 => l2_error_vector(mesh, &volume, &qh, &*q),
                Quantity::UL2 => l2_error(mesh, &volume, &uh, &*u),
                Quantity::QL2Boundary => l2_error_interface_vector(mesh, &boundary, &edge, &qh, &*q)?,
                Quantity::UL2Boundary => l2_error_interface(mesh, &boundary, &edge, &uh, &*u)?,
                Quantity::UstarL2Boundary => l2_error_interface(mesh, &boundary, &edge, &us, &*u)?,
                Quantity::PL2 | Quantity::ZL2 | Quantity::GL2Boundary => {
                    return Err(hdglab_core::Error::InvalidParameter(format!(
                        "{quantity} is only defined for the control problem"
                    )))
                }
            })
        })
        .collect()
}

fn poisson_level(config: &StudyConfig, domain: Domain, exact: &Manufactured, k: usize, n: usize) -> hdglab_core::Result<Vec<f64>> {
    let mesh = domain.build(n, config.diagonal)?;
    let reference = ReferenceElement::new(k)?;
    let reference_star = ReferenceElement::new(k + 1)?;
    let data = exact.problem_data(k, Stabilization::Constant(config.tau));
    let system = HdgSystem::new(&mesh, reference.clone(), &data.c, data.tau.clone())?;
    let loads = system.loads_from_fn(&*data.f);
    let trace = system.dirichlet_trace(&*data.g)?;
    let solution = system.solve(&loads, &trace)?;
    let solution = postprocess(&mesh, &reference, &reference_star, &solution, &Coefficient::Identity)?;
    measure_poisson(&mesh, exact, &solution, &reference, &reference_star, &config.norms)
}

/// Example 2 on one level.
pub fn control_level(config: &StudyConfig, k: usize, n: usize) -> hdglab_core::Result<Vec<f64>> {
    let mesh = Domain::UnitSquare.build(n, config.diagonal)?;
    let state = problems::example2_state();
    let adjoint = problems::example2_adjoint();
    let mut data = manufactured_control_data(&state, &adjoint, config.gamma, Domain::UnitSquare)?;
    data.degree = k;
    data.tau = Stabilization::Constant(config.tau);
    let solver = ControlSolver::new(&mesh, &data)?;
    let sol = solver.solve_optimum()?;
    let reference = solver.system().reference();
    let volume = triangle_quadrature(2 * k + 5)?;
    let boundary = mesh.boundary_faces();
    let (q, p) = (state.flux(), adjoint.flux());
    config
        .norms
        .iter()
        .map(|&quantity| {
            Ok(match quantity {
                Quantity::QL2 => l2_error_vector(&mesh, &volume, &|e, xi| sol.state.q_at(reference, e, xi), &*q),
                Quantity::UL2 => l2_error(&mesh, &volume, &|e, xi| sol.state.u_at(reference, e, xi), &*state.u),
                Quantity::PL2 => l2_error_vector(&mesh, &volume, &|e, xi| sol.adjoint.q_at(reference, e, xi), &*p),
                Quantity::ZL2 => l2_error(&mesh, &volume, &|e, xi| sol.adjoint.u_at(reference, e, xi), &*adjoint.u),
                Quantity::GL2Boundary => l2_error_face_field(&mesh, &boundary, k, &sol.g, &|f, x| {
                    data.exact_control(x, mesh.faces[f].normal).unwrap_or(f64::NAN)
                })?,
                other => {
                    return Err(hdglab_core::Error::InvalidParameter(format!(
                        "{other} is not reported for the control problem"
                    )))
                }
            })
        })
        .collect()
}

/// Errors of one level for the configured problem.
pub fn run_level(config: &StudyConfig, k: usize, n: usize) -> hdglab_core::Result<Vec<f64>> {
    match &config.problem {
        ProblemKind::Example1Square => poisson_level(config, Domain::UnitSquare, &problems::example1(), k, n),
        ProblemKind::Example1LShape => poisson_level(config, Domain::LShape, &problems::example1(), k, n),
        ProblemKind::Example2Control => control_level(config, k, n),
        ProblemKind::CustomManufactured => {
            let exact = problems::catalog(&config.solution).ok_or_else(|| {
                hdglab_core::Error::InvalidParameter(format!("unknown manufactured solution `{}`", config.solution))
            })?;
            poisson_level(config, config.domain, &exact, k, n)
        }
    }
}

/// Sweep all levels for degree `k`; a failing level is recorded, not fatal.
pub fn run_degree(config: &StudyConfig, k: usize) -> DegreeStudy {
    let mut report = ErrorReport::new(config.norms.clone());
    let mut seconds = Vec::new();
    for &n in &config.levels {
        let start = Instant::now();
        match run_level(config, k, n) {
            Ok(errors) => report.push_level(n, errors).expect("one error per quantity"),
            Err(e) => report.push_failure(n, e.code()),
        }
        seconds.push(start.elapsed().as_secs_f64());
    }
    DegreeStudy { degree: k, report, seconds }
}

/// Run every degree, writing one CSV (and optionally one SVG) per degree.
pub fn run_study(config: &StudyConfig) -> anyhow::Result<StudyOutcome> {
    config.validate()?;
    let mut studies = Vec::new();
    let mut files = Vec::new();
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    for &k in &config.degrees {
        let study = run_degree(config, k);
        if let Some(dir) = &config.out_dir {
            let stem = format!("{}_k{}", config.problem.name(), k);
            let csv_path = dir.join(format!("{stem}.csv"));
            output::write_csv(&csv_path, &study.report)?;
            files.push(csv_path);
            if config.svg {
                let svg_path = dir.join(format!("{stem}.svg"));
                let title = format!("{} k={k}", config.problem.name());
                std::fs::write(&svg_path, output::svg_plot(&study.report, k, &title))?;
                files.push(svg_path);
            }
        }
        studies.push(study);
    }
    Ok(StudyOutcome { studies, files })
}
