//! Driving chains whose transition matrix changes slowly, `P(nε)` at step
//! `n`, with the probe channels held fixed. The evolved extended state is
//! compared with the instantaneous steady state in the trace norm.

use std::io::Write;

use mris_chain::{ChainError, MarkovChain};
use mris_extended::{
    classify_generator, find_ess, ExtendedError, ExtendedGenerator, ExtendedState,
};
use mris_probes::MrisModel;
use nalgebra::DMatrix;
use qm_core::fmt::sig17;
use rayon::prelude::*;
use thiserror::Error;

/// Interior points of the primitivity check, in addition to both endpoints.
pub const PRIMITIVITY_GRID: usize = 20;

#[derive(Debug, Error)]
pub enum AdiabaticError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Extended(#[from] ExtendedError),
    #[error("generator is not primitive at s = {s}")]
    NotPrimitive { s: f64 },
    #[error("invalid schedule: {0}")]
    Schedule(&'static str),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, AdiabaticError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Linear,
    /// `3s² − 2s³`, with vanishing slope at both ends.
    Smoothstep,
}

impl Interpolation {
    pub fn weight(self, s: f64) -> f64 {
        match self {
            Self::Linear => s,
            Self::Smoothstep => s * s * (3.0 - 2.0 * s),
        }
    }
}

/// `P(s) = (1 − w(s)) P₀ + w(s) P₁` traversed in `steps` steps of size `ε = 1/steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticSchedule {
    pub p0: DMatrix<f64>,
    pub p1: DMatrix<f64>,
    pub shape: Interpolation,
    pub steps: usize,
}

impl AdiabaticSchedule {
    pub fn new(
        p0: DMatrix<f64>,
        p1: DMatrix<f64>,
        shape: Interpolation,
        steps: usize,
    ) -> Result<Self> {
        if p0.shape() != p1.shape() || p0.nrows() != p0.ncols() {
            return Err(AdiabaticError::Schedule(
                "endpoint matrices must be square and of equal size",
            ));
        }
        if steps == 0 {
            return Err(AdiabaticError::Schedule("at least one step is required"));
        }
        Ok(Self {
            p0,
            p1,
            shape,
            steps,
        })
    }

    pub fn constant(p: DMatrix<f64>, steps: usize) -> Result<Self> {
        Self::new(p.clone(), p, Interpolation::Linear, steps)
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / self.steps as f64
    }

    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        Self::new(self.p0.clone(), self.p1.clone(), self.shape, steps)
    }

    pub fn p_of_s(&self, s: f64) -> DMatrix<f64> {
        let w = self.shape.weight(s);
        if w == 0.0 || self.p0 == self.p1 {
            return self.p0.clone();
        }
        if w == 1.0 {
            return self.p1.clone();
        }
        &self.p0 * (1.0 - w) + &self.p1 * w
    }
}

/// The model's generator with its chain replaced by `P(s)`.
pub fn schedule_generator(
    model: &MrisModel,
    schedule: &AdiabaticSchedule,
    s: f64,
) -> Result<ExtendedGenerator> {
    if !(0.0..=1.0).contains(&s) {
        return Err(AdiabaticError::Schedule("s must lie in [0, 1]"));
    }
    let chain: MarkovChain = model.chain().with_p(schedule.p_of_s(s))?;
    Ok(model.generator().with_chain(chain)?)
}

#[derive(Debug, Clone)]
pub struct AdiabaticResult {
    /// `‖𝕃_ε^{(n)} R₀ − R_+(nε)‖₁` for `n = 1, …, N`.
    pub errors: Vec<f64>,
    /// Largest error over `n ≥ N/4`.
    pub plateau_error: f64,
    pub epsilon: f64,
    pub final_state: ExtendedState,
    pub final_steady_state: ExtendedState,
    /// Largest deviation of the total trace from one along the sweep.
    pub max_trace_error: f64,
    /// Smallest block eigenvalue met along the sweep.
    pub min_block_eigenvalue: f64,
}

fn ensure_primitive(
    model: &MrisModel,
    schedule: &AdiabaticSchedule,
    s: f64,
) -> Result<ExtendedGenerator> {
    let g = schedule_generator(model, schedule, s)?;
    if !classify_generator(&g)?.is_primitive() {
        return Err(AdiabaticError::NotPrimitive { s });
    }
    Ok(g)
}

/// Applies `𝕃(ε), 𝕃(2ε), …, 𝕃(1)` to `r0`, recording the distance to the
/// instantaneous steady state after each step.
pub fn adiabatic_evolve(
    model: &MrisModel,
    schedule: &AdiabaticSchedule,
    r0: &ExtendedState,
) -> Result<AdiabaticResult> {
    let grid: Vec<f64> = (0..=PRIMITIVITY_GRID + 1)
        .map(|k| k as f64 / (PRIMITIVITY_GRID + 1) as f64)
        .collect();
    grid.par_iter()
        .map(|&s| ensure_primitive(model, schedule, s).map(|_| ()))
        .collect::<Result<Vec<()>>>()?;
    let n = schedule.steps;
    let eps = schedule.epsilon();
    let (labels, d) = (model.omega_count(), model.dim());
    let mut x = r0.to_coords();
    let mut errors = Vec::with_capacity(n);
    let mut max_trace_error: f64 = 0.0;
    let mut min_block_eigenvalue = f64::INFINITY;
    let mut target = r0.clone();
    let mut state = r0.clone();
    for k in 1..=n {
        let s = (k as f64 * eps).min(1.0);
        let g = ensure_primitive(model, schedule, s)?;
        x = g.apply_coords(&x);
        state = ExtendedState::from_coords(&x, labels, d);
        target = find_ess(&g)?;
        errors.push(state.trace_distance(&target));
        max_trace_error = max_trace_error.max((state.total_trace() - 1.0).abs());
        min_block_eigenvalue = min_block_eigenvalue.min(state.min_block_eigenvalue());
    }
    let plateau_error = errors[(n / 4).saturating_sub(1)..]
        .iter()
        .copied()
        .fold(0.0, f64::max);
    Ok(AdiabaticResult {
        errors,
        plateau_error,
        epsilon: eps,
        final_state: state,
        final_steady_state: target,
        max_trace_error,
        min_block_eigenvalue,
    })
}

/// Independent sweeps of the same schedule shape at several step counts.
pub fn adiabatic_sweeps(
    model: &MrisModel,
    schedule: &AdiabaticSchedule,
    steps: &[usize],
    r0: &ExtendedState,
) -> Result<Vec<AdiabaticResult>> {
    steps
        .par_iter()
        .map(|&n| adiabatic_evolve(model, &schedule.with_steps(n)?, r0))
        .collect()
}

/// Columns `n, n_eps, error`.
pub fn write_profile_csv<W: Write>(out: W, result: &AdiabaticResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "n_eps", "error"])?;
    for (k, e) in result.errors.iter().enumerate() {
        let n = k + 1;
        w.write_record([n.to_string(), sig17(n as f64 * result.epsilon), sig17(*e)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
