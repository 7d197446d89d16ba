use thiserror::Error;

/// Failures raised while validating or constructing quantum objects.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QmError {
    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not Hermitian (max |M - M^dag| = {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not unitary (max |U U^dag - 1| = {residual:e})")]
    NotUnitary { residual: f64 },

    #[error("state has trace {trace}, expected 1")]
    BadTrace { trace: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPositive { min_eig: f64 },

    #[error("inverse temperature must be finite and non-negative, got {0}")]
    InvalidBeta(f64),

    #[error("state is not faithful (min eigenvalue {min_eig:e}); -log(rho) is undefined")]
    NotFaithful { min_eig: f64 },

    #[error("Kraus family is not trace preserving (residual {residual:e})")]
    NotTracePreserving { residual: f64 },

    #[error("empty Kraus family")]
    EmptyKraus,
}

pub type Result<T> = std::result::Result<T, QmError>;
