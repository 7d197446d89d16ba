use mris_extended::ExtendedError;
use mris_probes::ProbeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Extended(#[from] ExtendedError),
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("trajectory with seed {seed}: outcome probabilities sum to {total} at step {step}")]
    Corrupted { seed: u64, step: usize, total: f64 },
    #[error("enumeration would visit {size} words, above the limit {limit}")]
    TooLarge { size: f64, limit: f64 },
    #[error("generator is reducible")]
    Reducible,
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TrajectoryError>;
