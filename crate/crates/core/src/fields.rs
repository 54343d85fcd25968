//! Shared function-valued data: sources, boundary data, exact solutions and
//! the diffusivity tensor.

use alloc::sync::Arc;

use crate::mesh::Point;

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>;

pub fn scalar_fn(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(f)
}

pub fn vector_fn(f: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> VectorFn {
    Arc::new(f)
}

pub fn tensor_fn(f: impl Fn(Point) -> [[f64; 2]; 2] + Send + Sync + 'static) -> TensorFn {
    Arc::new(f)
}

pub fn constant_scalar(value: f64) -> ScalarFn {
    Arc::new(move |_| value)
}

/// Symmetric positive definite diffusivity `c`.
#[derive(Clone, Default)]
pub enum Coefficient {
    #[default]
    Identity,
    Constant([[f64; 2]; 2]),
    Field(TensorFn),
}

impl Coefficient {
    #[inline]
    pub fn at(&self, x: Point) -> [[f64; 2]; 2] {
        match self {
            Coefficient::Identity => [[1.0, 0.0], [0.0, 1.0]],
            Coefficient::Constant(c) => *c,
            Coefficient::Field(f) => f(x),
        }
    }

    /// `c^{-1}`, used to turn `-∇u` into the flux `q` of a manufactured solution.
    pub fn inverse_at(&self, x: Point) -> [[f64; 2]; 2] {
        let c = self.at(x);
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        [[c[1][1] / det, -c[0][1] / det], [-c[1][0] / det, c[0][0] / det]]
    }
}

impl core::fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Coefficient::Identity => f.write_str("Identity"),
            Coefficient::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Coefficient::Field(_) => f.write_str("Field(..)"),
        }
    }
}
