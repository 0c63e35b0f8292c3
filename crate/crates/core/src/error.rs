use thiserror::Error;

/// Errors raised by the library. The split between validation and numerical
/// failures drives the CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible constraints: {0}")]
    ConstraintViolation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("constraint projection failed after {iterations} Newton steps (area violation {area_violation:.3e}, volume violation {volume_violation:.3e})")]
    ProjectionFailed {
        iterations: usize,
        area_violation: f64,
        volume_violation: f64,
    },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverNonConvergence { iterations: usize, residual: f64 },

    #[error("serialization: {0}")]
    Serialization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateGeometry(_)
                | Error::ProjectionFailed { .. }
                | Error::SolverNonConvergence { .. }
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
