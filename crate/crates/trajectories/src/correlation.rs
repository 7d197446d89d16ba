//! Lagged covariances of the per-label entropy increments in the steady state.
//!
//! With `f_k ∈ ℝ^Ω` the increment vector of step `k` (nonzero only at the
//! label of that step), `C(n)_{ων} = Cov(f_{k+n}[ω], f_k[ν])` in the
//! stationary regime, and `C(−n) = C(n)^T`.

use mris_extended::{
    classify_generator, ess_decompose, find_ess, increment_generator, tilted_generator,
    ExtendedState,
};
use mris_probes::MrisModel;
use nalgebra::DMatrix;

use crate::error::{Result, TrajectoryError};
use crate::sampler::{sample_entropy_process, TrajectoryConfig};
use crate::stats::CompensatedSum;

/// Exact lagged covariances `C(0), …, C(max_lag)` from the generator, in
/// the steady state returned by `find_ess`.
pub fn analytic_correlations(model: &MrisModel, max_lag: usize) -> Result<Vec<DMatrix<f64>>> {
    let r_plus = find_ess(model.generator())?;
    analytic_correlations_from(model, &r_plus, max_lag)
}

/// Lagged covariances in a given fixed point `r_plus` of the generator.
pub fn analytic_correlations_from(
    model: &MrisModel,
    r_plus: &ExtendedState,
    max_lag: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let g = model.generator();
    let chain = model.chain();
    let outcomes = model.outcome_maps()?;
    let labels = model.omega_count();
    let x_plus = r_plus.to_coords();
    let ds: Vec<_> = (0..labels)
        .map(|mu| increment_generator(chain, outcomes, mu))
        .collect::<std::result::Result<_, _>>()?;
    let d_plus: Vec<Vec<f64>> = ds.iter().map(|d| d.apply_coords(&x_plus)).collect();
    let mean: Vec<f64> = d_plus.iter().map(|y| g.coords_total_trace(y)).collect();
    let mut out = Vec::with_capacity(max_lag + 1);
    let mut c0 = DMatrix::zeros(labels, labels);
    for w in 0..labels {
        let sq = tilted_generator(
            chain,
            outcomes,
            |nu, dx| if nu == w { dx * dx } else { 0.0 },
        )?;
        c0[(w, w)] = g.coords_total_trace(&sq.apply_coords(&x_plus));
    }
    for a in 0..labels {
        for b in 0..labels {
            c0[(a, b)] -= mean[a] * mean[b];
        }
    }
    out.push(c0);
    // propagated[ν] = 𝕃^{n−1} D_ν R_+
    let mut propagated = d_plus;
    for lag in 1..=max_lag {
        if lag > 1 {
            for v in propagated.iter_mut() {
                *v = g.apply_coords(v);
            }
        }
        let c = DMatrix::from_fn(labels, labels, |w, nu| {
            g.coords_total_trace(&ds[w].apply_coords(&propagated[nu])) - mean[w] * mean[nu]
        });
        out.push(c);
    }
    Ok(out)
}

/// `C(n)` for any integer lag, given the nonnegative lags.
pub fn correlation_at(lags: &[DMatrix<f64>], n: isize) -> DMatrix<f64> {
    if n >= 0 {
        lags[n as usize].clone()
    } else {
        lags[n.unsigned_abs()].transpose()
    }
}

/// Monte Carlo estimate of the lagged covariances with their standard errors.
#[derive(Debug, Clone)]
pub struct EmpiricalCorrelations {
    pub mean: Vec<DMatrix<f64>>,
    pub stderr: Vec<DMatrix<f64>>,
    pub n_traj: usize,
}

/// Samples trajectories started in the steady state and estimates
/// `C(0), …, C(max_lag)`. Lagged products are time-averaged per trajectory
/// and centered with the mean over all trajectories; the standard errors
/// come from the spread of the per-trajectory products.
pub fn empirical_correlations(
    model: &MrisModel,
    max_lag: usize,
    cfg: &TrajectoryConfig,
) -> Result<EmpiricalCorrelations> {
    if cfg.n_steps <= max_lag + 1 {
        return Err(TrajectoryError::Config("n_steps must exceed max_lag + 1"));
    }
    let g = model.generator();
    if !classify_generator(g)?.is_irreducible() {
        return Err(TrajectoryError::Reducible);
    }
    let dec = ess_decompose(g, &find_ess(g)?)?;
    let stationary = model.with_initial(dec.pi_plus, dec.rho_plus)?;
    let records = sample_entropy_process(&stationary, &cfg.recording())?;
    let labels = model.omega_count();
    // Per trajectory: time-averaged increments and uncentered lagged products.
    let per_traj: Vec<(Vec<f64>, Vec<DMatrix<f64>>)> = records
        .iter()
        .map(|r| {
            let steps = r.steps.as_ref().expect("recorded");
            let n = steps.len();
            let mut mean = vec![0.0; labels];
            for s in steps {
                mean[s.omega] += s.increment / n as f64;
            }
            let products = (0..=max_lag)
                .map(|lag| {
                    let mut acc = DMatrix::zeros(labels, labels);
                    for k in 0..n - lag {
                        let (later, earlier) = (&steps[k + lag], &steps[k]);
                        acc[(later.omega, earlier.omega)] += later.increment * earlier.increment;
                    }
                    acc / (n - lag) as f64
                })
                .collect();
            (mean, products)
        })
        .collect();
    let m = per_traj.len() as f64;
    let grand: Vec<f64> = (0..labels)
        .map(|w| {
            per_traj
                .iter()
                .map(|(mu, _)| mu[w])
                .collect::<CompensatedSum>()
                .value()
                / m
        })
        .collect();
    let mut mean = Vec::with_capacity(max_lag + 1);
    let mut stderr = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        // Linearized per-trajectory contributions, so that the spread also
        // carries the uncertainty of the subtracted means.
        let q = |t: &(Vec<f64>, Vec<DMatrix<f64>>), a: usize, b: usize| {
            t.1[lag][(a, b)] - t.0[a] * grand[b] - grand[a] * t.0[b] + grand[a] * grand[b]
        };
        let est = DMatrix::from_fn(labels, labels, |a, b| {
            per_traj
                .iter()
                .map(|t| q(t, a, b))
                .collect::<CompensatedSum>()
                .value()
                / m
        });
        let var = DMatrix::from_fn(labels, labels, |a, b| {
            per_traj
                .iter()
                .map(|t| (q(t, a, b) - est[(a, b)]).powi(2))
                .sum::<f64>()
                / (m - 1.0).max(1.0)
        });
        stderr.push(var.map(|v| (v / m).sqrt()));
        mean.push(est);
    }
    Ok(EmpiricalCorrelations {
        mean,
        stderr,
        n_traj: records.len(),
    })
}
