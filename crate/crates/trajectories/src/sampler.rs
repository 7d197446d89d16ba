//! Monte Carlo sampling of measured trajectories and of ergodic averages.

use mris_chain::{sample_index, sample_path, seeded_rng};
use mris_extended::{classify_generator, ExtendedObservable};
use mris_probes::MrisModel;
use qm_core::matrix::from_coords;
use qm_core::ComplexMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Result, TrajectoryError};
use crate::kernel::{dot, Kernel};
use crate::stats::ErgodicEstimate;

/// Outcome probabilities below this are treated as impossible.
pub const SKIP_PROBABILITY: f64 = 1e-14;
/// Allowed drift of the total outcome probability before a run is aborted.
pub const NORMALIZATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryConfig {
    pub n_steps: usize,
    pub n_traj: usize,
    /// Trajectory `k` uses seed `base_seed + k` (wrapping).
    pub base_seed: u64,
    /// Keep the per-step label, outcome and increment of every trajectory.
    pub record_states: bool,
}

impl TrajectoryConfig {
    pub fn new(n_steps: usize, n_traj: usize, base_seed: u64) -> Self {
        Self {
            n_steps,
            n_traj,
            base_seed,
            record_states: false,
        }
    }

    pub fn recording(mut self) -> Self {
        self.record_states = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(TrajectoryError::Config("n_steps must be positive"));
        }
        if self.n_traj == 0 {
            return Err(TrajectoryError::Config("n_traj must be positive"));
        }
        Ok(())
    }

    pub fn seed(&self, k: usize) -> u64 {
        self.base_seed.wrapping_add(k as u64)
    }
}

/// One interaction of a recorded trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub omega: usize,
    /// Index into the outcome list of probe `omega`.
    pub xi: usize,
    pub increment: f64,
}

#[derive(Debug, Clone)]
pub struct EntropyRecord {
    pub seed: u64,
    pub n_steps: usize,
    /// Label drawn before the first interaction.
    pub omega0: usize,
    /// Present when the configuration asked for recording.
    pub steps: Option<Vec<Step>>,
    /// Summed increments per probe label.
    pub s_n_j: Vec<f64>,
    /// Total entropy increment.
    pub sigma: f64,
    pub final_state: ComplexMatrix,
    /// Steps at which impossible outcomes were dropped and the rest rescaled.
    pub renormalizations: usize,
}

impl EntropyRecord {
    pub fn increments_len(&self) -> usize {
        self.n_steps
    }
}

/// Samples `cfg.n_traj` independent measured trajectories in parallel.
pub fn sample_entropy_process(
    model: &MrisModel,
    cfg: &TrajectoryConfig,
) -> Result<Vec<EntropyRecord>> {
    cfg.validate()?;
    let kernel = Kernel::full(model)?;
    let pi = model.chain().pi().to_vec();
    let init: Vec<Vec<f64>> = model
        .spec()
        .rho_init
        .iter()
        .map(|r| qm_core::to_coords(r.matrix()))
        .collect();
    (0..cfg.n_traj)
        .into_par_iter()
        .map(|k| run_one(&kernel, &pi, &init, cfg, cfg.seed(k)))
        .collect()
}

fn run_one(
    k: &Kernel,
    pi: &[f64],
    init: &[Vec<f64>],
    cfg: &TrajectoryConfig,
    seed: u64,
) -> Result<EntropyRecord> {
    let mut rng = seeded_rng(seed);
    let n_labels = pi.len();
    let m = k.m();
    let omega0 = sample_index(pi, rng.random::<f64>());
    let mut omega = omega0;
    let mut x = init[omega0].clone();
    let mut y = vec![0.0; m];
    let mut s_n_j = vec![0.0; n_labels];
    let mut steps = cfg.record_states.then(|| Vec::with_capacity(cfg.n_steps));
    let mut renormalizations = 0;
    let mut probs = Vec::new();
    for step in 0..cfg.n_steps {
        omega = sample_index(&k.rows[omega], rng.random::<f64>());
        let outs = &k.outcomes[omega];
        probs.clear();
        probs.extend(outs.iter().map(|o| dot(&o.trace_row, &x)));
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL || !total.is_finite() {
            return Err(TrajectoryError::Corrupted { seed, step, total });
        }
        let mut dropped = false;
        for p in probs.iter_mut() {
            if *p < SKIP_PROBABILITY {
                dropped |= *p != 0.0;
                *p = 0.0;
            }
        }
        let kept: f64 = probs.iter().sum();
        if dropped {
            renormalizations += 1;
        }
        let u = rng.random::<f64>() * kept;
        let xi = sample_index(&probs, u);
        let o = &outs[xi];
        o.op.apply(&x, &mut y);
        let p = probs[xi];
        for (a, b) in x.iter_mut().zip(&y) {
            *a = b / p;
        }
        s_n_j[omega] += o.increment;
        if let Some(s) = steps.as_mut() {
            s.push(Step {
                omega,
                xi,
                increment: o.increment,
            });
        }
    }
    Ok(EntropyRecord {
        seed,
        n_steps: cfg.n_steps,
        omega0,
        steps,
        sigma: s_n_j.iter().sum(),
        s_n_j,
        final_state: from_coords(&x, k.d),
        renormalizations,
    })
}

/// Unmeasured system states `ρ_0, L_{ω_1}ρ_0, …` along a fixed label word.
pub fn simulate_states(
    model: &MrisModel,
    interactions: &[usize],
    rho0: &ComplexMatrix,
) -> Vec<ComplexMatrix> {
    let kernel = Kernel::channels(model);
    let mut x = qm_core::to_coords(rho0);
    let mut y = vec![0.0; kernel.m()];
    let mut out = Vec::with_capacity(interactions.len() + 1);
    out.push(rho0.clone());
    for &w in interactions {
        kernel.channels[w].apply(&x, &mut y);
        std::mem::swap(&mut x, &mut y);
        out.push(from_coords(&x, kernel.d));
    }
    out
}

/// Per-trajectory time averages `(1/N) Σ_{n<N} ⟨ρ_n, X(ω_{n+1})⟩` of every
/// observable along sampled label paths, summarized across trajectories.
pub fn ergodic_average(
    model: &MrisModel,
    observables: &[ExtendedObservable],
    cfg: &TrajectoryConfig,
) -> Result<ErgodicEstimate> {
    cfg.validate()?;
    if !classify_generator(model.generator())?.is_irreducible() {
        return Err(TrajectoryError::Reducible);
    }
    let kernel = Kernel::channels(model);
    let m = kernel.m();
    let obs: Vec<Vec<f64>> = observables
        .iter()
        .map(ExtendedObservable::to_coords)
        .collect();
    let init: Vec<Vec<f64>> = model
        .spec()
        .rho_init
        .iter()
        .map(|r| qm_core::to_coords(r.matrix()))
        .collect();
    let samples: Vec<Vec<f64>> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|k| {
            let path = sample_path(model.chain(), cfg.n_steps, cfg.seed(k));
            let mut x = init[path[0]].clone();
            let mut y = vec![0.0; m];
            let mut acc = vec![0.0; obs.len()];
            for &w in &path[1..] {
                for (a, o) in acc.iter_mut().zip(&obs) {
                    *a += dot(&x, &o[w * m..(w + 1) * m]);
                }
                kernel.channels[w].apply(&x, &mut y);
                std::mem::swap(&mut x, &mut y);
            }
            acc.iter().map(|a| a / cfg.n_steps as f64).collect()
        })
        .collect();
    Ok(ErgodicEstimate::from_samples(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use mris_probes::fixtures;
    use qm_core::matrix::max_abs_diff;

    #[test]
    fn seeds_reproduce_trajectories() {
        let m = fixtures::two_temperature();
        let cfg = TrajectoryConfig::new(50, 8, 17).recording();
        let a = sample_entropy_process(&m, &cfg).unwrap();
        let b = sample_entropy_process(&m, &cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.seed, y.seed);
            assert_eq!(x.steps, y.steps);
            assert_eq!(x.s_n_j, y.s_n_j);
        }
        assert_ne!(a[0].steps, a[1].steps);
    }

    #[test]
    fn label_sums_add_up_to_total() {
        let m = fixtures::two_temperature();
        let cfg = TrajectoryConfig::new(40, 4, 3).recording();
        for r in sample_entropy_process(&m, &cfg).unwrap() {
            let steps = r.steps.as_ref().unwrap();
            assert_eq!(steps.len(), 40);
            let total: f64 = steps.iter().map(|s| s.increment).sum();
            assert!((total - r.sigma).abs() < 1e-12);
            for (w, s) in r.s_n_j.iter().enumerate() {
                let by_label: f64 = steps
                    .iter()
                    .filter(|s| s.omega == w)
                    .map(|s| s.increment)
                    .sum();
                assert!((by_label - s).abs() < 1e-12);
            }
            assert!((r.final_state.trace().re - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn trivial_propagator_produces_no_entropy() {
        let m = fixtures::trivial();
        let cfg = TrajectoryConfig::new(30, 5, 0);
        for r in sample_entropy_process(&m, &cfg).unwrap() {
            assert_eq!(r.sigma, 0.0);
            assert!(r.s_n_j.iter().all(|&s| s == 0.0));
        }
    }

    #[test]
    fn unmeasured_states_follow_channels() {
        let m = fixtures::two_temperature();
        let rho0 = m.spec().rho_init[0].matrix().clone();
        let word = [0, 1, 1, 0];
        let states = simulate_states(&m, &word, &rho0);
        let mut want = rho0;
        for (k, &w) in word.iter().enumerate() {
            want = m.probe(w).channel.apply(&want);
            assert!(max_abs_diff(&states[k + 1], &want) < 1e-12);
        }
    }

    #[test]
    fn rejects_empty_configuration() {
        let m = fixtures::two_temperature();
        assert!(sample_entropy_process(&m, &TrajectoryConfig::new(0, 1, 0)).is_err());
        assert!(sample_entropy_process(&m, &TrajectoryConfig::new(1, 0, 0)).is_err());
    }

    #[test]
    fn ergodic_average_rejects_reducible_models() {
        let m = fixtures::decoupled();
        let obs = m.flux_observables().j_nu;
        let err = ergodic_average(&m, &obs, &TrajectoryConfig::new(10, 2, 0)).unwrap_err();
        assert!(matches!(err, TrajectoryError::Reducible));
    }
}
