use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid power spectral density: {0}")]
    InvalidPsd(String),

    #[error("invalid drift: {0}")]
    InvalidDrift(String),

    #[error("drift returned a non-finite value at t = {time}")]
    NonFiniteDrift { time: f64 },

    #[error("matrix is not positive semidefinite: {0}")]
    NotPositiveSemidefinite(String),

    #[error("kernel is not positive semidefinite at this resolution (min eigenvalue {min_eigenvalue:e})")]
    KernelNotPsd { min_eigenvalue: f64 },

    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("numerical fault: {0}")]
    NumericalFault(String),

    #[error("oracle did not converge: last dyadic increment {increment:e} exceeds tolerance {tolerance:e}")]
    OracleNotConverged { increment: f64, tolerance: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("epsilon too large for this horizon: exponent {exponent:e} overflows")]
    MomentOverflow { exponent: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
