//! Dense quantum-mechanical building blocks at small fixed dimension.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Superoperators use
//! column-stacking vectorization, so a Kraus family `{K}` has superoperator
//! `Σ conj(K) ⊗ K`. Spectral work on Hermiticity-preserving maps is done on
//! their real matrices in an orthonormal basis of Hermitian matrices.

pub mod channel;
pub mod error;
pub mod fmt;
pub mod matrix;
pub mod random;
pub mod spectral;
pub mod state;

pub use channel::{
    choi_matrix, choi_report, choi_verify, env_kraus_family, reduced_map, ChoiReport, EnvKraus,
    EnvKrausFamily, QuantumChannel,
};
pub use error::{QmError, Result};
pub use matrix::{
    eigh, eigvalsh, from_coords, hermitian_basis, partial_trace_env, tensor, to_coords,
    ComplexMatrix, C64,
};
pub use spectral::{spectral_projections, SpectralDecomposition};
pub use state::{
    propagator, relative_entropy, thermal_state, von_neumann_entropy, DensityMatrix, Observable,
    RelativeEntropy, ThermalState, Tolerances, UnitaryPropagator,
};
