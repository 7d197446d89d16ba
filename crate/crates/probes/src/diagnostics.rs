//! Checks of the structural assumptions and of the one-step entropy balance.

use mris_extended::{classify_generator, ess_decompose, expectation, EssDecomposition};
use qm_core::matrix::{max_abs, max_abs_diff, tensor};
use qm_core::{relative_entropy, von_neumann_entropy, ComplexMatrix, RelativeEntropy};

use crate::error::{ProbeError, Result};
use crate::model::MrisModel;

/// Transition probabilities at or below this are not transitions.
const EDGE: f64 = 1e-14;
/// Verdict threshold for the structural identities.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Eigenvalue floor in relative entropies.
pub const ENTROPY_FLOOR: f64 = 1e-300;
/// Weight outside the reference support tolerated before a relative entropy is infinite.
pub const SUPPORT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct TriReport {
    pub holds: bool,
    /// `max|W conj(W) − 𝟙|` over the system and every probe.
    pub involution_residual: f64,
    /// Per probe `max|W_E conj(H_E) − H_E W_E|`.
    pub env_residuals: Vec<f64>,
    /// Per probe `max|(W_S⊗W_E) conj(U) − U^†(W_S⊗W_E)|`.
    pub propagator_residuals: Vec<f64>,
    pub max_residual: f64,
}

fn conj(m: &ComplexMatrix) -> ComplexMatrix {
    m.map(|z| z.conj())
}

/// Time-reversal invariance with `θ = W ∘ conj` in the computational basis.
pub fn check_tri(model: &MrisModel) -> Result<TriReport> {
    let tri = model
        .spec()
        .tri
        .as_ref()
        .ok_or(ProbeError::MissingTimeReversal)?;
    let involution =
        |w: &ComplexMatrix| max_abs(&(w * conj(w) - ComplexMatrix::identity(w.nrows(), w.ncols())));
    let mut involution_residual = involution(&tri.w_sys);
    let mut env_residuals = Vec::new();
    let mut propagator_residuals = Vec::new();
    for (omega, w_e) in tri.w_env.iter().enumerate() {
        involution_residual = involution_residual.max(involution(w_e));
        let h = model.spec().probes[omega].h_env.matrix();
        env_residuals.push(max_abs_diff(&(w_e * conj(h)), &(h * w_e)));
        let u = model.probe(omega).propagator.matrix();
        let w = tensor(&tri.w_sys, w_e);
        propagator_residuals.push(max_abs_diff(&(&w * conj(u)), &(u.adjoint() * &w)));
    }
    let max_residual = env_residuals
        .iter()
        .chain(&propagator_residuals)
        .copied()
        .fold(involution_residual, f64::max);
    Ok(TriReport {
        holds: max_residual <= IDENTITY_TOL,
        involution_residual,
        env_residuals,
        propagator_residuals,
        max_residual,
    })
}

#[derive(Debug, Clone)]
pub struct KmsReport {
    pub holds: bool,
    /// Per probe `max|−log ρ_E − β(H_E − F)|`, `None` for non-thermal probes.
    pub residuals: Vec<Option<f64>>,
}

/// Compares the entropy observable with `β(H_E − F)` for thermal probes.
pub fn check_kms(model: &MrisModel) -> KmsReport {
    let mut residuals = Vec::new();
    for (omega, spec) in model.spec().probes.iter().enumerate() {
        let data = model.probe(omega);
        let r = match (&data.unraveling, data.free_energy, &spec.env_state) {
            (Some(unr), Some(f), None) => {
                let d = spec.h_env.dim();
                let want =
                    (spec.h_env.matrix() - ComplexMatrix::identity(d, d).scale(f)).scale(spec.beta);
                Some(max_abs_diff(&unr.entropy_observable, &want))
            }
            _ => None,
        };
        residuals.push(r);
    }
    KmsReport {
        holds: residuals
            .iter()
            .all(|r| r.is_some_and(|v| v <= IDENTITY_TOL)),
        residuals,
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub is_equilibrium: bool,
    /// `max ‖U_ω(ρ_{+ν}⊗ρ_E)U_ω^† − ρ_{+ω}⊗ρ_E‖` over transitions `ν → ω`.
    pub max_residual: f64,
    /// Mean entropy production `⟨R_+, J_S⟩`.
    pub ep_value: f64,
    /// `⟨R_+, J_ν⟩` per label.
    pub mean_fluxes: Vec<f64>,
    /// Whether the verdict agrees with `⟨R_+, J_S⟩ ≤ IDENTITY_TOL`.
    pub consistent: bool,
    pub decomposition: EssDecomposition,
}

/// Tests whether every interaction leaves the steady product state invariant.
pub fn check_equilibrium(model: &MrisModel) -> Result<EquilibriumReport> {
    let g = model.generator();
    let class = classify_generator(g)?;
    if !class.is_irreducible() {
        return Err(ProbeError::Reducible);
    }
    let r_plus = class
        .ess
        .expect("irreducible generators carry a steady state");
    let decomposition = ess_decompose(g, &r_plus)?;
    let n = model.omega_count();
    let p = model.chain().p();
    let mut max_residual = 0.0_f64;
    for omega in 0..n {
        let data = model.probe(omega);
        let u = data.propagator.matrix();
        let env = data.rho_env.matrix();
        let target = tensor(decomposition.rho_plus[omega].matrix(), env);
        for nu in 0..n {
            if p[(nu, omega)] > EDGE {
                let evolved = u * tensor(decomposition.rho_plus[nu].matrix(), env) * u.adjoint();
                max_residual = max_residual.max(max_abs_diff(&evolved, &target));
            }
        }
    }
    let fluxes = model.flux_observables();
    let j_s = fluxes
        .j_s
        .ok_or(ProbeError::SingularEnvironment { omega: 0 })?;
    let ep_value = expectation(&r_plus, &j_s);
    let mean_fluxes = fluxes
        .j_nu
        .iter()
        .map(|j| expectation(&r_plus, j))
        .collect();
    let is_equilibrium = max_residual <= IDENTITY_TOL;
    Ok(EquilibriumReport {
        is_equilibrium,
        max_residual,
        ep_value,
        mean_fluxes,
        consistent: is_equilibrium == (ep_value <= IDENTITY_TOL),
        decomposition,
    })
}

/// One interaction step starting from `ρ`.
#[derive(Debug, Clone, Copy)]
pub struct BalanceReport {
    /// `ΔS = S(ρ) − S(L_ω ρ)`.
    pub delta_s: f64,
    /// `Ent(U(ρ⊗ρ_E)U^† | L_ω ρ ⊗ ρ_E)`.
    pub ep: RelativeEntropy,
    /// Heat `ΔQ = tr((ρ⊗ρ_E)(U^†H_E U − H_E))` absorbed by the probe.
    pub heat: f64,
    /// `−⟨ρ, J(ω)⟩`, the same heat through the flux observable.
    pub heat_from_flux: f64,
    /// `⟨ρ, J_S(ω)⟩`.
    pub entropy_flux: f64,
    /// `ΔS + ep − β ΔQ` (thermal probes only, else NaN).
    pub kms_residual: f64,
    /// `ΔS + ep − ⟨ρ, J_S(ω)⟩`.
    pub general_residual: f64,
}

/// Evaluates both forms of the one-step entropy balance.
pub fn entropy_balance(
    model: &MrisModel,
    omega: usize,
    rho: &ComplexMatrix,
) -> Result<BalanceReport> {
    let spec = &model.spec().probes[omega];
    let data = model.probe(omega);
    let u = data.propagator.matrix();
    let env = data.rho_env.matrix();
    let ds = model.dim();
    let joint = u * tensor(rho, env) * u.adjoint();
    let out = data.channel.apply(rho);
    let delta_s = von_neumann_entropy(rho) - von_neumann_entropy(&out);
    let ep = relative_entropy(&joint, &tensor(&out, env), ENTROPY_FLOOR, SUPPORT_TOL);
    let h_e = tensor(&ComplexMatrix::identity(ds, ds), spec.h_env.matrix());
    let heat = (&joint * &h_e).trace().re - (env * spec.h_env.matrix()).trace().re;
    let heat_from_flux = -(rho * data.flux.matrix()).trace().re;
    let entropy_flux = data
        .entropy_flux
        .as_ref()
        .map(|j| (rho * j.matrix()).trace().re)
        .unwrap_or(f64::NAN);
    let kms_residual = if spec.env_state.is_none() {
        delta_s + ep.value() - spec.beta * heat
    } else {
        f64::NAN
    };
    Ok(BalanceReport {
        delta_s,
        ep,
        heat,
        heat_from_flux,
        entropy_flux,
        kms_residual,
        general_residual: delta_s + ep.value() - entropy_flux,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{temperature_deform, MrisModel};
    use qm_core::random::random_density;
    use qm_core::{DensityMatrix, Observable, Tolerances};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn real_fixture_is_time_reversal_invariant() {
        let rep = check_tri(&fixtures::two_temperature()).unwrap();
        assert!(rep.holds);
        assert!(rep.max_residual < 1e-12);
    }

    #[test]
    fn complex_phase_breaks_the_naive_reversal() {
        let mut spec = fixtures::two_temperature_spec();
        let phase = qm_core::C64::from_polar(1.0, 0.7);
        let sp = fixtures::sigma_plus();
        let term = tensor(&sp, &sp.adjoint()).map(|z| z * phase);
        let v = (&term + term.adjoint()).scale(0.5);
        spec.probes[0].coupling = Observable::new(v, &Tolerances::default()).unwrap();
        let rep = check_tri(&MrisModel::build(spec).unwrap()).unwrap();
        assert!(!rep.holds);
        assert!(rep.propagator_residuals[0] > 1e-3);
    }

    #[test]
    fn equal_temperatures_are_at_equilibrium() {
        let rep = check_equilibrium(&fixtures::equilibrium()).unwrap();
        assert!(rep.is_equilibrium && rep.consistent);
        assert!(rep.max_residual <= 1e-10);
        assert!(rep.ep_value.abs() <= 1e-10);
        assert!(rep.mean_fluxes.iter().all(|j| j.abs() <= 1e-10));
    }

    #[test]
    fn different_temperatures_produce_entropy() {
        let rep = check_equilibrium(&fixtures::two_temperature()).unwrap();
        assert!(!rep.is_equilibrium && rep.consistent);
        assert!(rep.ep_value > 1e-4);
        let shifted = temperature_deform(&fixtures::equilibrium(), &[0.1, -0.1]).unwrap();
        let rep = check_equilibrium(&shifted).unwrap();
        assert!(!rep.is_equilibrium);
        assert!(rep.mean_fluxes.iter().all(|j| j.abs() > 1e-6));
    }

    #[test]
    fn decoupled_model_has_no_unique_steady_state() {
        assert!(matches!(
            check_equilibrium(&fixtures::decoupled()),
            Err(ProbeError::Reducible)
        ));
    }

    #[test]
    fn one_step_balance_holds_for_thermal_and_general_probes() {
        let m = fixtures::two_temperature();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let rho = random_density(&mut rng, 2);
            for omega in 0..2 {
                let b = entropy_balance(&m, omega, &rho).unwrap();
                assert!(b.kms_residual.abs() < 1e-10);
                assert!(b.general_residual.abs() < 1e-10);
                assert!(b.ep.value() >= -1e-12);
                assert!((b.heat - b.heat_from_flux).abs() < 1e-12);
            }
        }
        let mut spec = fixtures::two_temperature_spec();
        for p in &mut spec.probes {
            p.env_state = Some(
                DensityMatrix::new(random_density(&mut rng, 2), &Tolerances::default()).unwrap(),
            );
        }
        let m = MrisModel::build(spec).unwrap();
        for _ in 0..20 {
            let rho = random_density(&mut rng, 2);
            let b = entropy_balance(&m, 1, &rho).unwrap();
            assert!(b.kms_residual.is_nan());
            assert!(b.general_residual.abs() < 1e-10);
        }
    }

    #[test]
    fn kms_identity_holds_for_thermal_probes() {
        let rep = check_kms(&fixtures::two_temperature());
        assert!(rep.holds);
    }
}
