//! Extended states and the Feynman–Kac generator of a system driven by a
//! Markov chain of channels.
//!
//! An extended state is a family `R(ω)` of positive blocks with total trace
//! one; the generator acts as `(𝕃R)(ω) = Σ_ν P_νω L_ν R(ν)`, so `R(ω)` is the
//! system state about to interact with probe `ω`.

pub mod error;
pub mod generator;
pub mod spectrum;
pub mod state;

pub use error::{ExtendedError, Result};
pub use generator::{
    build_generator, build_generator_with, deformed_generator, evolve, increment_generator,
    initial_extended_state, tilted_generator, ExtendedGenerator, OutcomeMaps,
};
pub use spectrum::{
    classify_generator, dominant_pair, ess_decompose, find_ess, fixed_point_residual, DominantPair,
    EssDecomposition, GeneratorClassification, GeneratorKind,
};
pub use state::{expectation, pairing, ExtendedObservable, ExtendedState};
