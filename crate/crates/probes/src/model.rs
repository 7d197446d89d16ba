//! Model description and the derived per-probe objects.

use mris_chain::MarkovChain;
use mris_extended::{
    build_generator_with, deformed_generator, initial_extended_state, ExtendedGenerator,
    ExtendedObservable, ExtendedState, OutcomeMaps,
};
use qm_core::matrix::{hermitize, max_abs_diff, partial_trace_env, tensor};
use qm_core::{
    propagator, reduced_map, thermal_state, ComplexMatrix, DensityMatrix, Observable,
    QuantumChannel, Tolerances, UnitaryPropagator,
};

use crate::error::{ProbeError, Result};
use crate::unravel::Unraveling;

/// Physical data of one probe type.
#[derive(Debug, Clone)]
pub struct ProbeSpec {
    pub h_env: Observable,
    /// Inverse temperature of the thermal probe state.
    pub beta: f64,
    /// Interaction time.
    pub tau: f64,
    /// Coupling on `H_S ⊗ H_E`.
    pub coupling: Observable,
    /// Replaces the thermal state when set (non-thermal but possibly faithful probes).
    pub env_state: Option<DensityMatrix>,
}

impl ProbeSpec {
    pub fn thermal(h_env: Observable, beta: f64, tau: f64, coupling: Observable) -> Self {
        Self {
            h_env,
            beta,
            tau,
            coupling,
            env_state: None,
        }
    }
}

/// Anti-unitaries `θ = W ∘ conj` on the system and on every probe.
#[derive(Debug, Clone)]
pub struct TimeReversalData {
    pub w_sys: ComplexMatrix,
    pub w_env: Vec<ComplexMatrix>,
}

/// Everything needed to build a model.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub h_sys: Observable,
    pub chain: MarkovChain,
    pub probes: Vec<ProbeSpec>,
    /// `ρ_ω`, the system state preceding the first interaction when `ω₀ = ω`.
    pub rho_init: Vec<DensityMatrix>,
    pub tri: Option<TimeReversalData>,
    pub tol: Tolerances,
}

/// Derived data of one probe.
#[derive(Debug, Clone)]
pub struct ProbeData {
    pub rho_env: DensityMatrix,
    /// Free energy of a thermal probe with positive `β`.
    pub free_energy: Option<f64>,
    pub propagator: UnitaryPropagator,
    pub channel: QuantumChannel,
    /// Energy flux `J(ω) = tr_E(U^†[U, H_E](𝟙⊗ρ_E))`.
    pub flux: Observable,
    /// Entropy flux `J_S(ω) = tr_E(U^†[S_E, U](𝟙⊗ρ_E))`, present when `ρ_E` is faithful.
    pub entropy_flux: Option<Observable>,
    pub unraveling: Option<Unraveling>,
}

/// A repeated-interaction model with all derived objects cached.
#[derive(Debug, Clone)]
pub struct MrisModel {
    spec: ModelSpec,
    probes: Vec<ProbeData>,
    generator: ExtendedGenerator,
    outcome_maps: Option<Vec<OutcomeMaps>>,
}

/// `tr_E((𝟙⊗A − U^†(𝟙⊗A)U)(𝟙⊗ρ_E))`, which is `tr_E(U^†[U, 𝟙⊗A](𝟙⊗ρ_E))`.
pub fn commutator_flux(
    u: &ComplexMatrix,
    a_env: &ComplexMatrix,
    rho_env: &ComplexMatrix,
    ds: usize,
) -> Result<ComplexMatrix> {
    let de = a_env.nrows();
    let id = ComplexMatrix::identity(ds, ds);
    let a = tensor(&id, a_env);
    let m = (&a - u.adjoint() * &a * u) * tensor(&id, rho_env);
    Ok(hermitize(&partial_trace_env(&m, ds, de)?))
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(ProbeError::Mismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

impl MrisModel {
    pub fn build(spec: ModelSpec) -> Result<Self> {
        let n = spec.chain.len();
        let ds = spec.h_sys.dim();
        check_len("probe count", n, spec.probes.len())?;
        check_len("initial state count", n, spec.rho_init.len())?;
        for rho in &spec.rho_init {
            check_len("initial state dimension", ds, rho.dim())?;
        }
        if let Some(tri) = &spec.tri {
            check_len("time-reversal probe count", n, tri.w_env.len())?;
        }
        let tol = spec.tol;
        let mut probes = Vec::with_capacity(n);
        for (omega, p) in spec.probes.iter().enumerate() {
            let de = p.h_env.dim();
            check_len("coupling dimension", ds * de, p.coupling.dim())?;
            if !(p.tau > 0.0) {
                return Err(ProbeError::NonPositiveTau { omega, tau: p.tau });
            }
            let (rho_env, free_energy) = match &p.env_state {
                Some(state) => {
                    check_len("environment state dimension", de, state.dim())?;
                    (state.clone(), None)
                }
                None => {
                    if !(p.beta >= 0.0) {
                        return Err(ProbeError::NonPositiveBeta {
                            omega,
                            beta: p.beta,
                        });
                    }
                    let th = thermal_state(&p.h_env, p.beta)?;
                    (th.state, th.free_energy)
                }
            };
            let id_s = ComplexMatrix::identity(ds, ds);
            let id_e = ComplexMatrix::identity(de, de);
            let total = tensor(spec.h_sys.matrix(), &id_e)
                + tensor(&id_s, p.h_env.matrix())
                + p.coupling.matrix();
            let u = propagator(&Observable::new(total, &tol)?, p.tau);
            let channel = reduced_map(&u, &rho_env, ds)?;
            let flux = Observable::from_hermitian_part(&commutator_flux(
                u.matrix(),
                p.h_env.matrix(),
                rho_env.matrix(),
                ds,
            )?);
            let unraveling = match Unraveling::new(u.matrix(), &rho_env, ds, tol.degeneracy, omega)
            {
                Ok(unr) => Some(unr),
                Err(ProbeError::SingularEnvironment { .. }) => None,
                Err(e) => return Err(e),
            };
            let entropy_flux = match &unraveling {
                Some(unr) => Some(Observable::from_hermitian_part(&-commutator_flux(
                    u.matrix(),
                    &unr.entropy_observable,
                    rho_env.matrix(),
                    ds,
                )?)),
                None => None,
            };
            probes.push(ProbeData {
                rho_env,
                free_energy,
                propagator: u,
                channel,
                flux,
                entropy_flux,
                unraveling,
            });
        }
        let channels: Vec<QuantumChannel> = probes.iter().map(|p| p.channel.clone()).collect();
        let generator = build_generator_with(&spec.chain, &channels, &tol)?;
        let outcome_maps = probes
            .iter()
            .map(|p| {
                p.unraveling.as_ref().map(|u| {
                    let pieces: Vec<_> = u.outcomes.iter().map(|o| (o.increment, &o.map)).collect();
                    OutcomeMaps::new(&pieces)
                })
            })
            .collect::<Option<Vec<_>>>();
        Ok(Self {
            spec,
            probes,
            generator,
            outcome_maps,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn tol(&self) -> &Tolerances {
        &self.spec.tol
    }

    pub fn dim(&self) -> usize {
        self.spec.h_sys.dim()
    }

    pub fn omega_count(&self) -> usize {
        self.spec.chain.len()
    }

    pub fn chain(&self) -> &MarkovChain {
        &self.spec.chain
    }

    pub fn labels(&self) -> &[String] {
        self.spec.chain.labels()
    }

    pub fn generator(&self) -> &ExtendedGenerator {
        &self.generator
    }

    pub fn probe(&self, omega: usize) -> &ProbeData {
        &self.probes[omega]
    }

    pub fn probes(&self) -> &[ProbeData] {
        &self.probes
    }

    pub fn channels(&self) -> Vec<QuantumChannel> {
        self.probes.iter().map(|p| p.channel.clone()).collect()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.spec.probes.iter().map(|p| p.beta).collect()
    }

    /// Whether every probe is in the thermal state of its own Hamiltonian at positive `β`.
    pub fn is_kms(&self) -> bool {
        self.spec
            .probes
            .iter()
            .all(|p| p.env_state.is_none() && p.beta > 0.0)
    }

    pub fn unraveling(&self, omega: usize) -> Result<&Unraveling> {
        self.probes[omega]
            .unraveling
            .as_ref()
            .ok_or(ProbeError::SingularEnvironment { omega })
    }

    /// Outcome maps of every probe; requires faithful probe states.
    pub fn outcome_maps(&self) -> Result<&[OutcomeMaps]> {
        self.outcome_maps.as_deref().ok_or_else(|| {
            let omega = self
                .probes
                .iter()
                .position(|p| p.unraveling.is_none())
                .unwrap_or(0);
            ProbeError::SingularEnvironment { omega }
        })
    }

    /// `R₀(ω) = Σ_ν π_ν P_νω ρ_ν`.
    pub fn initial_state(&self) -> ExtendedState {
        initial_extended_state(&self.spec.chain, &self.spec.rho_init).expect("validated on build")
    }

    /// The α-deformed generator.
    pub fn deformed_generator(&self, alpha: &[f64]) -> Result<ExtendedGenerator> {
        Ok(deformed_generator(
            &self.spec.chain,
            self.outcome_maps()?,
            alpha,
        )?)
    }

    /// `J_ν` as extended observables, one per label.
    pub fn flux_observables(&self) -> FluxObservables {
        let n = self.omega_count();
        let j: Vec<Observable> = self.probes.iter().map(|p| p.flux.clone()).collect();
        let j_nu = (0..n)
            .map(|nu| ExtendedObservable::single(n, nu, j[nu].matrix()))
            .collect();
        let j_s = self
            .probes
            .iter()
            .all(|p| p.entropy_flux.is_some())
            .then(|| {
                ExtendedObservable::new(
                    self.probes
                        .iter()
                        .map(|p| p.entropy_flux.as_ref().expect("checked").matrix().clone())
                        .collect(),
                    &Tolerances::default(),
                )
                .expect("Hermitian blocks")
            });
        FluxObservables { j, j_nu, j_s }
    }

    /// Same probes and channels driven by a different chain on the same labels.
    pub fn with_chain(&self, chain: MarkovChain) -> Result<Self> {
        check_len("chain size", self.omega_count(), chain.len())?;
        let mut out = self.clone();
        out.generator = self.generator.with_chain(chain.clone())?;
        out.spec.chain = chain;
        Ok(out)
    }

    /// Same model started from other initial data.
    pub fn with_initial(&self, pi: Vec<f64>, rho_init: Vec<DensityMatrix>) -> Result<Self> {
        check_len("initial state count", self.omega_count(), rho_init.len())?;
        let mut out = self.clone();
        out.spec.chain = self.spec.chain.with_pi(pi)?;
        out.spec.rho_init = rho_init;
        out.generator = self.generator.with_chain(out.spec.chain.clone())?;
        Ok(out)
    }
}

/// Flux observables of a model.
#[derive(Debug, Clone)]
pub struct FluxObservables {
    /// `J(ω)` on the system.
    pub j: Vec<Observable>,
    /// `J_ν(ω') = δ_{νω'} J(ν)`.
    pub j_nu: Vec<ExtendedObservable>,
    /// `J_S(ω)`, present when every probe state is faithful.
    pub j_s: Option<ExtendedObservable>,
}

/// `J(ω)` of a built model.
pub fn flux_observable(model: &MrisModel, omega: usize) -> &Observable {
    &model.probe(omega).flux
}

/// `J_S` of a built model.
pub fn entropy_flux_observable(model: &MrisModel) -> Result<ExtendedObservable> {
    model.flux_observables().j_s.ok_or_else(|| {
        let omega = model
            .probes
            .iter()
            .position(|p| p.entropy_flux.is_none())
            .unwrap_or(0);
        ProbeError::SingularEnvironment { omega }
    })
}

/// Rebuilds the model with probe inverse temperatures `β_ω − ζ_ω`; the
/// propagators depend only on the Hamiltonians and are therefore unchanged.
pub fn temperature_deform(model: &MrisModel, zeta: &[f64]) -> Result<MrisModel> {
    check_len("temperature shift length", model.omega_count(), zeta.len())?;
    let mut spec = model.spec.clone();
    for (omega, (p, z)) in spec.probes.iter_mut().zip(zeta).enumerate() {
        let beta = p.beta - z;
        if !(beta > 0.0) {
            return Err(ProbeError::NonPositiveBeta { omega, beta });
        }
        p.beta = beta;
    }
    MrisModel::build(spec)
}

/// Largest entrywise difference between the cached matrices of two models.
pub fn model_difference(a: &MrisModel, b: &MrisModel) -> f64 {
    let mut worst = (a.generator.real_matrix() - b.generator.real_matrix())
        .abs()
        .max();
    for (p, q) in a.probes.iter().zip(&b.probes) {
        worst = worst
            .max(max_abs_diff(p.rho_env.matrix(), q.rho_env.matrix()))
            .max(max_abs_diff(p.propagator.matrix(), q.propagator.matrix()))
            .max(max_abs_diff(p.channel.superop(), q.channel.superop()))
            .max(max_abs_diff(p.flux.matrix(), q.flux.matrix()));
    }
    worst
}
