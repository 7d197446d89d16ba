//! Gaussian fluctuations and linear response near equilibrium.

use mris_extended::{classify_generator, expectation, find_ess, ExtendedObservable};
use mris_probes::{check_equilibrium, temperature_deform, MrisModel};
use mris_trajectories::{analytic_correlations, correlation_at};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::cumulant::CumulantFunction;
use crate::error::{FluctuationError, Result};

/// Step in the inverse temperatures for the flux derivatives.
pub const ZETA_STEP: f64 = 1e-3;
/// Largest spread of the inverse temperatures accepted as a common value.
pub const EQUAL_BETA_TOL: f64 = 1e-12;

/// Asymptotic covariance of `S_N𝔍/√N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CltCovariance {
    pub c: DMatrix<f64>,
    /// `∂_ω ℓ(0)`.
    pub first_derivs: Vec<f64>,
    /// `∂_ω∂_ν ℓ(0)`.
    pub second_derivs: DMatrix<f64>,
}

impl CltCovariance {
    /// Smallest eigenvalue of the symmetrized covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.c + self.c.transpose()) * 0.5;
        sym.symmetric_eigen().eigenvalues.min()
    }
}

/// `C_ων = ℓ_ων − ℓ_ω ℓ_ν` from finite differences of `ℓ` at the origin.
pub fn clt_covariance(cf: &CumulantFunction) -> Result<CltCovariance> {
    let (first, second) = cf.ell_derivatives()?;
    let n = first.len();
    let c = DMatrix::from_fn(n, n, |a, b| second[(a, b)] - first[a] * first[b]);
    Ok(CltCovariance {
        c,
        first_derivs: first,
        second_derivs: second,
    })
}

/// Steady-state energy flux `⟨R_+, J_ω⟩` out of every probe.
pub fn steady_fluxes(model: &MrisModel) -> Result<Vec<f64>> {
    let r_plus = find_ess(model.generator())?;
    let obs: Vec<ExtendedObservable> = model.flux_observables().j_nu;
    Ok(obs.iter().map(|x| expectation(&r_plus, x)).collect())
}

/// The common inverse temperature of an equilibrium model.
pub fn common_beta(model: &MrisModel) -> Result<f64> {
    let betas = model.betas();
    let bar = betas.iter().sum::<f64>() / betas.len() as f64;
    let spread = betas.iter().map(|b| (b - bar).abs()).fold(0.0, f64::max);
    if spread > EQUAL_BETA_TOL {
        return Err(FluctuationError::NotEquilibrium { residual: spread });
    }
    Ok(bar)
}

fn require_equilibrium(model: &MrisModel) -> Result<f64> {
    let beta = common_beta(model)?;
    let rep = check_equilibrium(model)?;
    if !rep.is_equilibrium {
        return Err(FluctuationError::NotEquilibrium {
            residual: rep.max_residual,
        });
    }
    Ok(beta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticMatrix {
    /// `L_ων = ∂_{ζ_ν} ⟨R_{+ζ}, J_{ωζ}⟩` with `β_ν → β̄ − ζ_ν`.
    pub l: DMatrix<f64>,
    /// `∂_ω∂_ν e(0) / (2β̄²)`.
    pub l_from_cumulant: DMatrix<f64>,
    /// Largest entrywise difference of the two.
    pub discrepancy: f64,
    pub beta_bar: f64,
    pub zeta_step: f64,
}

impl KineticMatrix {
    pub fn onsager_residual(&self) -> f64 {
        (&self.l - self.l.transpose()).amax()
    }
}

/// Kinetic coefficients by differentiating steady fluxes in the
/// temperatures (central differences at `ZETA_STEP` and half of it, one
/// Richardson step), together with the cumulant Hessian route.
pub fn kinetic_coefficients(model: &MrisModel) -> Result<KineticMatrix> {
    let beta_bar = require_equilibrium(model)?;
    let n = model.omega_count();
    let flux_at = |nu: usize, z: f64| -> Result<Vec<f64>> {
        let mut zeta = vec![0.0; n];
        zeta[nu] = z;
        steady_fluxes(&temperature_deform(model, &zeta)?)
    };
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|nu| {
            let d = |h: f64| -> Result<Vec<f64>> {
                let (p, m) = (flux_at(nu, h)?, flux_at(nu, -h)?);
                Ok(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect())
            };
            let (coarse, fine) = (d(ZETA_STEP)?, d(0.5 * ZETA_STEP)?);
            Ok(fine
                .iter()
                .zip(&coarse)
                .map(|(f, c)| (4.0 * f - c) / 3.0)
                .collect())
        })
        .collect::<Result<_>>()?;
    let l = DMatrix::from_fn(n, n, |w, nu| columns[nu][w]);
    let cf = CumulantFunction::new(model)?;
    let l_from_cumulant = cf.hessian(&vec![0.0; n])? / (2.0 * beta_bar * beta_bar);
    Ok(KineticMatrix {
        discrepancy: (&l - &l_from_cumulant).amax(),
        l,
        l_from_cumulant,
        beta_bar,
        zeta_step: ZETA_STEP,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenKubo {
    pub epsilons: Vec<f64>,
    /// `(1/2β̄²) Σ_{|n|≤cap} e^{−|n|ε} C(n)` for every `ε`.
    pub partial_sums: Vec<DMatrix<f64>>,
    /// Polynomial extrapolation of the partial sums to `ε = 0`.
    pub extrapolated: DMatrix<f64>,
    /// Untilted sum `Σ_{|n|≤cap} C(n)` without prefactor.
    pub correlation_sum: DMatrix<f64>,
    /// Largest entry of `C(cap)`, a proxy for the truncation error.
    pub last_lag_size: f64,
    pub lag_cap: usize,
    pub beta_bar: f64,
    /// `false` signals that the sums need not converge.
    pub primitive: bool,
}

/// Tilted sums of the stationary increment correlations.
pub fn green_kubo(model: &MrisModel, epsilons: &[f64], lag_cap: usize) -> Result<GreenKubo> {
    if epsilons.is_empty() || epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(FluctuationError::Config(
            "epsilons must be positive and nonempty",
        ));
    }
    let beta_bar = require_equilibrium(model)?;
    let primitive = classify_generator(model.generator())?.is_primitive();
    let lags = analytic_correlations(model, lag_cap)?;
    let n = model.omega_count();
    let tilted = |eps: f64| -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(n, n);
        for k in -(lag_cap as isize)..=(lag_cap as isize) {
            acc += correlation_at(&lags, k) * (-(k.unsigned_abs() as f64) * eps).exp();
        }
        acc
    };
    let pref = 1.0 / (2.0 * beta_bar * beta_bar);
    let partial_sums: Vec<DMatrix<f64>> = epsilons.iter().map(|&e| tilted(e) * pref).collect();
    let extrapolated = DMatrix::from_fn(n, n, |a, b| {
        let ys: Vec<f64> = partial_sums.iter().map(|m| m[(a, b)]).collect();
        extrapolate_to_zero(epsilons, &ys)
    });
    Ok(GreenKubo {
        epsilons: epsilons.to_vec(),
        partial_sums,
        extrapolated,
        correlation_sum: tilted(0.0),
        last_lag_size: lags[lag_cap].amax(),
        lag_cap,
        beta_bar,
        primitive,
    })
}

/// Neville's scheme for the interpolating polynomial through `(x_i, y_i)`, evaluated at 0.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (xs[i + k] * p[i] - xs[i] * p[i + 1]) / (xs[i + k] - xs[i]);
        }
    }
    p[0]
}
