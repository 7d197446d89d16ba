//! Sampling and exact enumeration of measured repeated-interaction trajectories.
//!
//! A trajectory draws `ω_0 ~ π`, starts from `ρ_{ω_0}`, and for each step
//! draws the next label from the chain, then a measurement outcome `ξ` of
//! that probe with probability `tr(L_{ω,ξ} ρ)`, and updates `ρ` to the
//! normalized post-measurement state. The entropy increment of the step is
//! `δξ` and is credited to the label of the step.

pub mod correlation;
pub mod error;
pub mod exact;
pub mod export;
mod kernel;
pub mod sampler;
pub mod stats;

pub use correlation::{
    analytic_correlations, analytic_correlations_from, correlation_at, empirical_correlations,
    EmpiricalCorrelations,
};
pub use error::{Result, TrajectoryError};
pub use exact::{enumerate_from, enumerate_full_statistics, ExactDistribution, ExactEntry};
pub use export::{records_json, write_records_csv};
pub use sampler::{
    ergodic_average, sample_entropy_process, simulate_states, EntropyRecord, Step, TrajectoryConfig,
};
pub use stats::{
    empirical_covariance, empirical_cumulant, rate_estimate, CompensatedSum, ErgodicEstimate,
};
