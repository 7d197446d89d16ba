use mris_chain::ChainError;
use mris_extended::ExtendedError;
use qm_core::QmError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error(transparent)]
    Qm(#[from] QmError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Extended(#[from] ExtendedError),
    #[error("{what}: expected {expected}, found {found}")]
    Mismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("probe {omega}: inverse temperature {beta} must be positive")]
    NonPositiveBeta { omega: usize, beta: f64 },
    #[error("probe {omega}: interaction time {tau} must be positive")]
    NonPositiveTau { omega: usize, tau: f64 },
    #[error("probe {omega}: environment state is not faithful, entropy observable undefined")]
    SingularEnvironment { omega: usize },
    #[error("model has no time-reversal data")]
    MissingTimeReversal,
    #[error("generator is reducible; the steady state is not unique")]
    Reducible,
}

pub type Result<T> = std::result::Result<T, ProbeError>;
