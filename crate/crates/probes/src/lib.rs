//! Repeated-interaction models assembled from probe Hamiltonians.
//!
//! For each probe label `ω` the model holds the thermal probe state, the
//! propagator `U_ω = e^{−iτ_ω(H_S + H_E + V_ω)}`, the reduced channel
//! `L_ω ρ = tr_E(U_ω(ρ⊗ρ_E)U_ω^†)`, its unraveling by a two-time
//! measurement of `S_E = −log ρ_E`, and the energy and entropy flux
//! observables.
//!
//! Sign convention: `⟨ρ, J(ω)⟩` is the energy leaving probe `ω` during one
//! interaction, so the heat absorbed by the probe is `ΔQ = −⟨ρ, J(ω)⟩`, and
//! for thermal probes `J_S(ω) = −β_ω J(ω)`.

pub mod diagnostics;
pub mod error;
pub mod fixtures;
pub mod model;
pub mod unravel;

pub use diagnostics::{
    check_equilibrium, check_kms, check_tri, entropy_balance, BalanceReport, EquilibriumReport,
    KmsReport, TriReport,
};
pub use error::{ProbeError, Result};
pub use model::{
    commutator_flux, entropy_flux_observable, flux_observable, model_difference,
    temperature_deform, FluxObservables, ModelSpec, MrisModel, ProbeData, ProbeSpec,
    TimeReversalData,
};
pub use unravel::{Outcome, Unraveling};
