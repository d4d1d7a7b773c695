use thiserror::Error;

/// Errors produced by the field, solver and classification layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("lattice mismatch between operands")]
    LatticeMismatch,

    #[error("winding extraction failed: {0}")]
    Winding(String),

    #[error("right-hand side violates the compatibility condition (normalized mean {0:.3e})")]
    Incompatible(f64),

    #[error("iteration did not converge after {iterations} steps (relative residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("angle field is not critical (relative residual {0:.3e})")]
    NotCritical(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
