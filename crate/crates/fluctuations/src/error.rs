use mris_extended::ExtendedError;
use mris_probes::ProbeError;
use mris_trajectories::TrajectoryError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FluctuationError {
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Extended(#[from] ExtendedError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("generator is reducible")]
    Reducible,
    #[error("model is not at equilibrium (residual {residual:e})")]
    NotEquilibrium { residual: f64 },
    #[error("argument has length {found}, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    Config(&'static str),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FluctuationError>;
