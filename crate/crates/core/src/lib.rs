//! Hybridizable discontinuous Galerkin (HDG) discretization of the 2D
//! diffusion problem `c q + ∇u = 0, ∇·q = f` with Dirichlet data, together
//! with elementwise superconvergent postprocessing, error measurement in
//! broken L∞/L² norms and a reduced-space solver for the Dirichlet boundary
//! control problem.
//!
//! The crate is `no_std` (it needs `alloc`). The `std` feature only unlocks
//! `std::error::Error`-dependent conveniences; `parallel` switches the element
//! loops over to rayon.
//!
//! Module map:
//! - [`mesh`]: structured triangulations of the unit square and the L-shape.
//! - [`quadrature`], [`basis`]: reference-element machinery.
//! - [`linalg`]: dense LU and preconditioned conjugate gradients.
//! - [`hdg_local`]: per-element blocks, static condensation, projections.
//! - [`hdg_solver`]: global skeleton assembly and solution recovery.
//! - [`postprocess`]: the local `P^{k+1}` reconstruction `u_h^⋆`.
//! - [`error_norms`]: L∞ / L² / boundary-L² errors and observed rates.
//! - [`control`]: the discrete optimality system for Dirichlet boundary control.
//! - [`problems`]: manufactured solutions used by the convergence studies.
//! - [`verify`]: independent oracles (direct-quadrature bilinear form, dense
//!   uncondensed solve, residual checks).
#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod basis;
pub mod control;
pub mod error;
pub mod error_norms;
pub mod hdg_local;
pub mod hdg_solver;
pub mod linalg;
pub mod mesh;
pub mod postprocess;
pub mod problems;
pub mod quadrature;
pub mod verify;

mod fields;
mod par;

pub use basis::{AffineMap, ReferenceElement};
pub use control::{ControlProblemData, ControlSolution};
pub use error::{Error, Result};
pub use error_norms::{ErrorReport, Quantity, SamplingSpec};
pub use fields::{
    constant_scalar, scalar_fn, tensor_fn, vector_fn, Coefficient, ScalarFn, TensorFn, VectorFn,
};
pub use hdg_local::{LocalOperators, Stabilization};
pub use hdg_solver::{FieldSolution, HdgSystem, ProblemData};
pub use linalg::{CgOptions, CgReport, DenseMatrix, Preconditioner, SparseSymmetric};
pub use mesh::{Diagonal, Domain, Face, Mesh, Point, Segment};
