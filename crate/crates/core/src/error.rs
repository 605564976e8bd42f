use std::path::PathBuf;

use thiserror::Error;

use crate::eigeniter::IterationTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("refinement level {level} out of range (max {max})")]
    LevelOutOfRange { level: u32, max: u32 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix flagged Hermitian violates |A - A^H| <= {tol:e} * max|A| (defect {defect:e})")]
    NotHermitian { defect: f64, tol: f64 },

    #[error("matrix is not square ({rows} x {cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not positive definite (non-positive pivot at {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,

    #[error("lambda = {lambda} lies within the pole guard of a dispersion pole at {pole}")]
    NearPole { lambda: f64, pole: f64 },

    #[error("operation requires a {expected} dispersion model")]
    WrongModel { expected: &'static str },

    #[error("invalid permittivity {value}: must be positive")]
    InvalidPermittivity { value: f64 },

    #[error("shift beta = {beta} does not exceed the positivity bound max(eta^2) - min(eta^2) = {bound}")]
    InsufficientShift { beta: f64, bound: f64 },

    #[error("bordered Newton matrix is singular; try a different normalization vector or starting pair")]
    SingularBordered,

    #[error("Newton iteration diverged (residual grew {consecutive} consecutive steps)")]
    Diverged {
        consecutive: usize,
        trace: Box<IterationTrace>,
    },

    #[error("no convergence within {steps} steps (last residual {residual:e})")]
    NotConverged { steps: usize, residual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("matrix market parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical method rather than of its inputs.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::Diverged { .. }
                | Error::NotConverged { .. }
                | Error::Singular
                | Error::SingularBordered
                | Error::NotPositiveDefinite { .. }
        )
    }
}
