use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("interface segment ({x0}, {y0})-({x1}, {y1}) is not resolved by the mesh")]
    UnresolvedInterface { x0: f64, y0: f64, x1: f64, y1: f64 },

    #[error("quadrature of exactness {requested} not supported (max {max})")]
    UnsupportedDegree { requested: usize, max: usize },

    #[error("matrix is numerically singular at column {column} (pivot {pivot:e})")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("iterative solver stopped after {iterations} iterations with relative residual {residual:e}")]
    IterativeFailure { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite (curvature {curvature:e} at iteration {iteration})")]
    NotSpd { iteration: usize, curvature: f64 },

    #[error("element {element} is degenerate")]
    DegenerateElement { element: usize },

    #[error("HDG projection failed on element {element}")]
    ProjectionFailure { element: usize },

    #[error("postprocessing failed on element {element}")]
    PostprocessFailure { element: usize },

    #[error("manufactured data inconsistent at ({x}, {y}): defect {defect:e}")]
    InconsistentManufacturedData { x: f64, y: f64, defect: f64 },
}

impl Error {
    /// Short machine-readable tag, used for `FAILED:<code>` cells in study tables.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::UnresolvedInterface { .. } => "unresolved-interface",
            Error::UnsupportedDegree { .. } => "unsupported-degree",
            Error::SingularMatrix { .. } => "singular-matrix",
            Error::IterativeFailure { .. } => "iterative-failure",
            Error::NotSpd { .. } => "not-spd",
            Error::DegenerateElement { .. } => "degenerate-element",
            Error::ProjectionFailure { .. } => "projection-failure",
            Error::PostprocessFailure { .. } => "postprocess-failure",
            Error::InconsistentManufacturedData { .. } => "inconsistent-manufactured-data",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
