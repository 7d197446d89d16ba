use num_complex::Complex64;
use qm_core::QmError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtendedError {
    #[error(transparent)]
    Qm(#[from] QmError),
    #[error("{what}: expected {expected}, found {found}")]
    Mismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("block {omega} is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NegativeBlock { omega: usize, min_eig: f64 },
    #[error("total trace {trace} differs from 1")]
    BadTrace { trace: f64 },
    #[error("block {omega} is not Hermitian (residual {residual:e})")]
    NotHermitian { omega: usize, residual: f64 },
    #[error("map for block {omega} is not completely positive (min Choi eigenvalue {min_eig:e})")]
    NotCompletelyPositive { omega: usize, min_eig: f64 },
    #[error("generator is not trace preserving (residual {residual:e})")]
    NotTracePreserving { residual: f64 },
    #[error("eigenvalue 1 is not simple (multiplicity {multiplicity})")]
    NotSimple { multiplicity: usize },
    #[error("steady state has a genuinely negative eigenvalue {min_eig:e}")]
    NegativeSteadyState { min_eig: f64 },
    #[error("fixed-point vector has vanishing total trace")]
    NoTrace,
    #[error("state is not fixed by the generator (residual {residual:e})")]
    NotFixed { residual: f64 },
    #[error("dominant eigenvalue {value} is not real and positive")]
    BadDominant { value: Complex64 },
    #[error("eigen-solver did not converge")]
    EigenSolver,
}

pub type Result<T> = std::result::Result<T, ExtendedError>;
