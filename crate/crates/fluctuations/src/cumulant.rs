//! The cumulant generating function `e(α) = log ℓ(α)`, with `ℓ(α)` the
//! spectral radius of the deformed generator.

use std::collections::HashMap;
use std::sync::Mutex;

use mris_extended::{classify_generator, evolve, ExtendedError};
use mris_probes::MrisModel;
use nalgebra::DMatrix;
use qm_core::matrix::real_eigenvalues;
use rayon::prelude::*;

use crate::error::{FluctuationError, Result};

/// Step of the central differences for first derivatives.
pub const FIRST_STEP: f64 = 1e-4;
/// Step of the central differences for second derivatives.
pub const SECOND_STEP: f64 = 1e-3;

const KEY_SCALE: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cached {
    ell: f64,
}

/// `e(α)` of one model, memoized on `α` rounded to twelve decimals.
#[derive(Debug)]
pub struct CumulantFunction {
    model: MrisModel,
    cache: Mutex<HashMap<Vec<i64>, Cached>>,
}

impl CumulantFunction {
    /// Requires an irreducible generator and faithful probe states.
    pub fn new(model: &MrisModel) -> Result<Self> {
        if !classify_generator(model.generator())?.is_irreducible() {
            return Err(FluctuationError::Reducible);
        }
        model.outcome_maps()?;
        Ok(Self {
            model: model.clone(),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn model(&self) -> &MrisModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.omega_count()
    }

    fn check(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() != self.dim() {
            return Err(FluctuationError::Length {
                expected: self.dim(),
                found: alpha.len(),
            });
        }
        Ok(())
    }

    /// Spectral radius `ℓ(α)` of the deformed generator.
    pub fn ell(&self, alpha: &[f64]) -> Result<f64> {
        self.check(alpha)?;
        let key: Vec<i64> = alpha
            .iter()
            .map(|a| (a * KEY_SCALE).round() as i64)
            .collect();
        if let Some(c) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(c.ell);
        }
        let g = self.model.deformed_generator(alpha)?;
        let ell = spectral_radius(g.real_matrix())?;
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, Cached { ell });
        Ok(ell)
    }

    pub fn e(&self, alpha: &[f64]) -> Result<f64> {
        Ok(self.ell(alpha)?.ln())
    }

    /// `e` on many points in parallel.
    pub fn e_many(&self, alphas: &[Vec<f64>]) -> Result<Vec<f64>> {
        alphas.par_iter().map(|a| self.e(a)).collect()
    }

    /// `(1/N) log ⟨𝕃^{[α]N}R₀, 𝟙⟩`, the finite-time cumulant.
    pub fn finite_n(&self, alpha: &[f64], n: usize) -> Result<f64> {
        self.check(alpha)?;
        let g = self.model.deformed_generator(alpha)?;
        Ok(evolve(&g, &self.model.initial_state(), n)
            .total_trace()
            .ln()
            / n as f64)
    }

    pub fn gradient(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        gradient(&|a: &[f64]| self.e(a), alpha, FIRST_STEP)
    }

    pub fn hessian(&self, alpha: &[f64]) -> Result<DMatrix<f64>> {
        hessian(&|a: &[f64]| self.e(a), alpha, SECOND_STEP)
    }

    /// `∇ℓ(0)` and `∇²ℓ(0)`.
    pub fn ell_derivatives(&self) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let zero = vec![0.0; self.dim()];
        let f = |a: &[f64]| self.ell(a);
        Ok((
            gradient(&f, &zero, FIRST_STEP)?,
            hessian(&f, &zero, SECOND_STEP)?,
        ))
    }

    /// Asymptotic mean rate of `S_N𝔍/N`, equal to `−∇e(0)`.
    pub fn mean_rate(&self) -> Result<Vec<f64>> {
        Ok(self
            .gradient(&vec![0.0; self.dim()])?
            .into_iter()
            .map(|g| -g)
            .collect())
    }

    /// Largest violation of `e((a+b)/2) ≤ (e(a)+e(b))/2` over the given pairs.
    pub fn midpoint_violation(&self, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
        pairs
            .par_iter()
            .map(|(a, b)| {
                let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
                Ok(self.e(&mid)? - 0.5 * (self.e(a)? + self.e(b)?))
            })
            .collect::<Result<Vec<f64>>>()
            .map(|v| v.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Diagonal similarity `D⁻¹AD` with power-of-two entries that roughly
/// equalizes row and column norms.
pub fn balance(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut b = a.clone();
    loop {
        let mut done = true;
        for i in 0..n {
            let c: f64 = (0..n).filter(|&j| j != i).map(|j| b[(j, i)].abs()).sum();
            let r: f64 = (0..n).filter(|&j| j != i).map(|j| b[(i, j)].abs()).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let mut cc = c;
            while cc < r / 2.0 {
                cc *= 2.0;
                f *= 2.0;
            }
            while cc >= r * 2.0 {
                cc /= 2.0;
                f /= 2.0;
            }
            if (cc + r / f) < 0.95 * (c + r) {
                done = false;
                for j in 0..n {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
        if done {
            return b;
        }
    }
}

/// Largest-modulus eigenvalue of a positive map in real coordinates, which
/// must be real and positive. The matrix is balanced first because tilted
/// generators become badly scaled for large tilts.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    let eigs = real_eigenvalues(&balance(a)).ok_or(ExtendedError::EigenSolver)?;
    let radius = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let best = eigs
        .iter()
        .filter(|z| z.norm() >= radius * (1.0 - 1e-10))
        .copied()
        .max_by(|x, y| x.re.total_cmp(&y.re))
        .ok_or(ExtendedError::EigenSolver)?;
    if best.re <= 0.0 || best.im.abs() > 1e-10 * radius.max(1.0) {
        return Err(ExtendedError::BadDominant { value: best }.into());
    }
    Ok(best.re)
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(i, d) in moves {
        y[i] += d;
    }
    y
}

/// Central differences at steps `h` and `h/2` combined by one Richardson step.
pub fn gradient<F>(f: &F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let d = |h: f64| -> Result<f64> {
                Ok((f(&shifted(x, &[(i, h)]))? - f(&shifted(x, &[(i, -h)]))?) / (2.0 * h))
            };
            Ok((4.0 * d(0.5 * h)? - d(h)?) / 3.0)
        })
        .collect()
}

/// Second differences with one Richardson step; mixed entries use the
/// four-corner stencil.
pub fn hessian<F>(f: &F, x: &[f64], h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let n = x.len();
    let f0 = f(x)?;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let d = |h: f64| -> Result<f64> {
                if i == j {
                    Ok(
                        (f(&shifted(x, &[(i, h)]))? - 2.0 * f0 + f(&shifted(x, &[(i, -h)]))?)
                            / (h * h),
                    )
                } else {
                    let pp = f(&shifted(x, &[(i, h), (j, h)]))?;
                    let pm = f(&shifted(x, &[(i, h), (j, -h)]))?;
                    let mp = f(&shifted(x, &[(i, -h), (j, h)]))?;
                    let mm = f(&shifted(x, &[(i, -h), (j, -h)]))?;
                    Ok((pp - pm - mp + mm) / (4.0 * h * h))
                }
            };
            Ok((4.0 * d(0.5 * h)? - d(h)?) / 3.0)
        })
        .collect::<Result<_>>()?;
    let mut out = DMatrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(vals) {
        out[(i, j)] = v;
        out[(j, i)] = v;
    }
    Ok(out)
}
