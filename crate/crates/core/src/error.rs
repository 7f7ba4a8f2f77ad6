use thiserror::Error;

/// Errors raised across the construction pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("pole: |denominator| = {magnitude:.3e} below tolerance {tolerance:.1e}")]
    Pole { magnitude: f64, tolerance: f64 },

    #[error("total degree {degree} exceeds cap {cap}")]
    DegreeOverflow { degree: u32, cap: u32 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("frame fails quaternion relations (residual {residual:.3e})")]
    Frame { residual: f64 },

    #[error("curvature is not of type (1,1) (residual {residual:.3e})")]
    Type11Violation { residual: f64 },

    #[error("integration step too large: Richardson estimate {estimate:.3e} above {tolerance:.1e}")]
    Step { estimate: f64, tolerance: f64 },

    #[error("finite-difference stencil leaves the sampled region")]
    Grid,

    #[error("point is not in the image of the evaluation map: {0}")]
    NotDecomposable(String),

    #[error("zero covector has no preimage under the blow-down map")]
    ZeroSection,

    #[error("Newton iteration diverged: {0}")]
    NewtonDivergence(String),

    #[error("rank check failed: expected {expected}, found {found}")]
    Rank { expected: usize, found: usize },

    #[error("quaternion relations violated (residual {residual:.3e})")]
    Relation { residual: f64 },

    #[error("no intersection with the hypersurface in the chart disk: {0}")]
    Intersection(String),

    #[error("linear system is singular or inconsistent (residual {residual:.3e}, condition {condition:.3e})")]
    SingularSystem { residual: f64, condition: f64 },

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
