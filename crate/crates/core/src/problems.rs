//! Manufactured solutions with `c = I`: `q = −∇u`, `f = −Δu`.

use crate::fields::{scalar_fn, vector_fn, Coefficient, ScalarFn, VectorFn};
use crate::hdg_local::Stabilization;
use crate::hdg_solver::ProblemData;
use crate::mesh::Point;
use libm::{cos, exp, sin};

use core::f64::consts::PI;

/// Exact scalar field with its gradient and Laplacian.
#[derive(Clone)]
pub struct Manufactured {
    pub u: ScalarFn,
    pub grad: VectorFn,
    pub laplacian: ScalarFn,
}

impl Manufactured {
    pub fn new(
        u: impl Fn(Point) -> f64 + Send + Sync + 'static,
        grad: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static,
        laplacian: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Manufactured { u: scalar_fn(u), grad: vector_fn(grad), laplacian: scalar_fn(laplacian) }
    }

    /// `q = −∇u`.
    pub fn flux(&self) -> VectorFn {
        let g = self.grad.clone();
        vector_fn(move |x| {
            let d = g(x);
            [-d[0], -d[1]]
        })
    }

    /// `f = −Δu`.
    pub fn source(&self) -> ScalarFn {
        let l = self.laplacian.clone();
        scalar_fn(move |x| -l(x))
    }

    /// Dirichlet problem with `g = u|_{∂Ω}`.
    pub fn problem_data(&self, degree: usize, tau: Stabilization) -> ProblemData {
        ProblemData { c: Coefficient::Identity, f: self.source(), g: self.u.clone(), tau, degree }
    }
}

/// Example 1: `u = sin(10x)`.
pub fn example1() -> Manufactured {
    Manufactured::new(
        |x| sin(10.0 * x[0]),
        |x| [10.0 * cos(10.0 * x[0]), 0.0],
        |x| -100.0 * sin(10.0 * x[0]),
    )
}

/// Optimal state of Example 2: `u = −π(sin πx + sin πy)`.
pub fn example2_state() -> Manufactured {
    Manufactured::new(
        |x| -PI * (sin(PI * x[0]) + sin(PI * x[1])),
        |x| [-PI * PI * cos(PI * x[0]), -PI * PI * cos(PI * x[1])],
        |x| PI * PI * PI * (sin(PI * x[0]) + sin(PI * x[1])),
    )
}

/// Adjoint of Example 2: `z = sin πx sin πy`.
pub fn example2_adjoint() -> Manufactured {
    sinsin()
}

fn sinsin() -> Manufactured {
    Manufactured::new(
        |x| sin(PI * x[0]) * sin(PI * x[1]),
        |x| [PI * cos(PI * x[0]) * sin(PI * x[1]), PI * sin(PI * x[0]) * cos(PI * x[1])],
        |x| -2.0 * PI * PI * sin(PI * x[0]) * sin(PI * x[1]),
    )
}

/// Names accepted by [`catalog`].
pub const CATALOG: [&str; 4] = ["example1", "sinsin", "exp", "poly"];

/// Manufactured solutions for custom studies.
pub fn catalog(name: &str) -> Option<Manufactured> {
    Some(match name {
        "example1" => example1(),
        "sinsin" => sinsin(),
        // u = exp(x + 2y)
        "exp" => Manufactured::new(
            |x| exp(x[0] + 2.0 * x[1]),
            |x| {
                let v = exp(x[0] + 2.0 * x[1]);
                [v, 2.0 * v]
            },
            |x| 5.0 * exp(x[0] + 2.0 * x[1]),
        ),
        // u = x³ − 2xy² + y
        "poly" => Manufactured::new(
            |x| x[0] * x[0] * x[0] - 2.0 * x[0] * x[1] * x[1] + x[1],
            |x| [3.0 * x[0] * x[0] - 2.0 * x[1] * x[1], -4.0 * x[0] * x[1] + 1.0],
            |x| 6.0 * x[0] - 4.0 * x[0],
        ),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(m: &Manufactured) {
        let h = 1e-4;
        for x in [[0.13, 0.71], [0.5, 0.5], [0.9, 0.2]] {
            let u = |dx: f64, dy: f64| (m.u)([x[0] + dx, x[1] + dy]);
            let gx = (u(h, 0.0) - u(-h, 0.0)) / (2.0 * h);
            let gy = (u(0.0, h) - u(0.0, -h)) / (2.0 * h);
            let lap = (u(h, 0.0) + u(-h, 0.0) + u(0.0, h) + u(0.0, -h) - 4.0 * u(0.0, 0.0)) / (h * h);
            let g = (m.grad)(x);
            let scale = 1.0 + g[0].abs() + g[1].abs();
            assert!((gx - g[0]).abs() < 1e-6 * scale);
            assert!((gy - g[1]).abs() < 1e-6 * scale);
            assert!(((m.laplacian)(x) - lap).abs() < 1e-3 * (1.0 + lap.abs()));
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for name in CATALOG {
            check(&catalog(name).unwrap());
        }
        check(&example2_state());
        assert!(catalog("nope").is_none());
    }

    #[test]
    fn example1_data() {
        let m = example1();
        let x = [0.3, 0.8];
        assert!(((m.source())(x) - 100.0 * sin(3.0)).abs() < 1e-12);
        assert!(((m.flux())(x)[0] + 10.0 * cos(3.0)).abs() < 1e-12);
    }
}
