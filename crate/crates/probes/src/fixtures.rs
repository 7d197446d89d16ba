//! Reference qubit models.
//!
//! The system and every probe are qubits with Hamiltonian `diag(0, 1)`,
//! coupled by the excitation exchange `λ(σ₊⊗σ₋ + σ₋⊗σ₊)` for a time `τ`,
//! and driven by a two-state chain. All data are real, so time reversal
//! holds with `W = 𝟙`.

use mris_chain::MarkovChain;
use qm_core::matrix::{diag_real, from_rows, tensor};
use qm_core::{ComplexMatrix, DensityMatrix, Observable, Tolerances};

use crate::model::{ModelSpec, MrisModel, ProbeSpec, TimeReversalData};

pub const LAMBDA: f64 = 0.5;
pub const TAU: f64 = 1.0;
pub const P_ROWS: [[f64; 2]; 2] = [[0.7, 0.3], [0.4, 0.6]];

pub fn sigma_plus() -> ComplexMatrix {
    from_rows(&[&[(0.0, 0.0), (1.0, 0.0)], &[(0.0, 0.0), (0.0, 0.0)]])
}

/// `λ(σ₊⊗σ₋ + σ₋⊗σ₊)`.
pub fn exchange_coupling(lambda: f64) -> ComplexMatrix {
    let sp = sigma_plus();
    let sm = sp.adjoint();
    (tensor(&sp, &sm) + tensor(&sm, &sp)).scale(lambda)
}

fn obs(m: ComplexMatrix) -> Observable {
    Observable::new(m, &Tolerances::default()).expect("fixture data are Hermitian")
}

/// Exchange model with one probe per entry of `betas`, chain rows `p`, and uniform `π`.
pub fn exchange_spec(betas: &[f64], p: &[&[f64]], lambda: f64, tau: f64) -> ModelSpec {
    let n = betas.len();
    let labels: Vec<String> = (1..=n).map(|k| format!("R{k}")).collect();
    let labels_ref: Vec<&str> = labels.iter().map(String::as_str).collect();
    let chain = MarkovChain::from_rows(&labels_ref, &vec![1.0 / n as f64; n], p)
        .expect("fixture chain is valid");
    let h = diag_real(&[0.0, 1.0]);
    let probes = betas
        .iter()
        .map(|&b| ProbeSpec::thermal(obs(h.clone()), b, tau, obs(exchange_coupling(lambda))))
        .collect();
    ModelSpec {
        h_sys: obs(h),
        chain,
        probes,
        rho_init: vec![DensityMatrix::maximally_mixed(2); n],
        tri: Some(TimeReversalData {
            w_sys: ComplexMatrix::identity(2, 2),
            w_env: vec![ComplexMatrix::identity(2, 2); n],
        }),
        tol: Tolerances::default(),
    }
}

fn p_rows() -> [&'static [f64]; 2] {
    [&P_ROWS[0], &P_ROWS[1]]
}

/// Two probes at inverse temperatures 1 and 2.
pub fn two_temperature_spec() -> ModelSpec {
    exchange_spec(&[1.0, 2.0], &p_rows(), LAMBDA, TAU)
}

/// Two probes at the common inverse temperature 1.
pub fn equilibrium_spec() -> ModelSpec {
    exchange_spec(&[1.0, 1.0], &p_rows(), LAMBDA, TAU)
}

pub fn two_temperature() -> MrisModel {
    MrisModel::build(two_temperature_spec()).expect("fixture builds")
}

pub fn equilibrium() -> MrisModel {
    MrisModel::build(equilibrium_spec()).expect("fixture builds")
}

/// The two-temperature model without coupling.
pub fn decoupled() -> MrisModel {
    MrisModel::build(exchange_spec(&[1.0, 2.0], &p_rows(), 0.0, TAU)).expect("fixture builds")
}

/// All Hamiltonians vanish, so every propagator is the identity.
pub fn trivial() -> MrisModel {
    let mut spec = exchange_spec(&[1.0, 2.0], &p_rows(), 0.0, TAU);
    let zero = ComplexMatrix::zeros(2, 2);
    spec.h_sys = obs(zero.clone());
    for p in &mut spec.probes {
        p.h_env = obs(zero.clone());
    }
    MrisModel::build(spec).expect("fixture builds")
}

/// Two-temperature model with extra couplings `μ(σ_x⊗σ_x + σ_y⊗σ_z)` on
/// the first probe and `μ(σ_y⊗σ_x + σ_x⊗σ_z)` on the second. Any
/// antiunitary symmetry must fix `σ_z` on the system; the first coupling then
/// forces it to reverse `σ_x` and the second to reverse `σ_y`, so no single
/// time reversal serves both probes.
pub fn tri_broken_spec() -> ModelSpec {
    let mut spec = two_temperature_spec();
    let sx = from_rows(&[&[(0.0, 0.0), (1.0, 0.0)], &[(1.0, 0.0), (0.0, 0.0)]]);
    let sy = from_rows(&[&[(0.0, 0.0), (0.0, -1.0)], &[(0.0, 1.0), (0.0, 0.0)]]);
    let sz = diag_real(&[1.0, -1.0]);
    let mu = 0.3;
    let extra = [
        tensor(&sx, &sx) + tensor(&sy, &sz),
        tensor(&sy, &sx) + tensor(&sx, &sz),
    ];
    for (p, x) in spec.probes.iter_mut().zip(extra) {
        p.coupling = obs(p.coupling.matrix() + x.scale(mu));
    }
    spec
}

pub fn tri_broken() -> MrisModel {
    MrisModel::build(tri_broken_spec()).expect("fixture builds")
}
