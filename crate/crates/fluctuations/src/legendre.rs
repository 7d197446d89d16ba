//! Legendre–Fenchel transforms of the cumulant generating function.
//!
//! `I(s) = sup_α (α·s − e(−α))` is maximized by a Levenberg–Marquardt
//! ascent with finite-difference derivatives inside the box `‖α‖∞ ≤ 50`.
//! A supremum that is still increasing on the box boundary is reported as
//! `+∞`.

use nalgebra::{DMatrix, DVector};

use crate::cumulant::{gradient, hessian, CumulantFunction, FIRST_STEP, SECOND_STEP};
use crate::error::{FluctuationError, Result};

pub const ALPHA_CLAMP: f64 = 50.0;
pub const MAX_ITERATIONS: usize = 200;
/// Stationarity threshold on the gradient of the objective.
pub const GRADIENT_TOL: f64 = 1e-9;
/// Outward slope on the box boundary above which the supremum is declared infinite.
pub const ESCAPE_SLOPE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LegendrePoint {
    /// `I(s)`, or `+∞`.
    pub value: f64,
    /// Attained maximizer `α*(s)` (on the box boundary when `value` is infinite).
    pub alpha: Vec<f64>,
    pub converged: bool,
}

impl LegendrePoint {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// `I` on a grid of `s`-vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFunction {
    pub grid: Vec<Vec<f64>>,
    pub points: Vec<LegendrePoint>,
    /// Asymptotic mean `−∇e(0)`, where `I` vanishes.
    pub minimizer: Vec<f64>,
}

impl RateFunction {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }
}

/// Maximizes `α·s − f(−α)` for a smooth convex `f` with `f(0) = 0`.
pub fn legendre<F>(f: &F, s: &[f64], start: &[f64]) -> Result<LegendrePoint>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let n = s.len();
    if start.len() != n {
        return Err(FluctuationError::Length {
            expected: n,
            found: start.len(),
        });
    }
    let neg = |a: &[f64]| -> Vec<f64> { a.iter().map(|x| -x).collect() };
    let objective = |a: &[f64]| -> Result<f64> {
        Ok(a.iter().zip(s).map(|(x, y)| x * y).sum::<f64>() - f(&neg(a))?)
    };
    // ∇_α f(−α) = −(∇f)(−α)
    let slope = |a: &[f64]| -> Result<Vec<f64>> {
        let g = gradient(f, &neg(a), FIRST_STEP)?;
        Ok(s.iter().zip(g).map(|(si, gi)| si + gi).collect())
    };
    let clamp = |a: Vec<f64>| -> Vec<f64> {
        a.into_iter()
            .map(|x| x.clamp(-ALPHA_CLAMP, ALPHA_CLAMP))
            .collect()
    };
    let mut alpha = clamp(start.to_vec());
    let mut value = objective(&alpha)?;
    let mut mu = 1e-3;
    let mut converged = false;
    let mut g = slope(&alpha)?;
    for _ in 0..MAX_ITERATIONS {
        let free: Vec<bool> = alpha
            .iter()
            .zip(&g)
            .map(|(a, gi)| !(a.abs() >= ALPHA_CLAMP && a.signum() == gi.signum()))
            .collect();
        let gmax = g
            .iter()
            .zip(&free)
            .filter(|(_, &f)| f)
            .map(|(x, _)| x.abs())
            .fold(0.0, f64::max);
        if gmax <= GRADIENT_TOL {
            converged = true;
            break;
        }
        let h = hessian(f, &neg(&alpha), SECOND_STEP)?;
        let scale = 1.0 + h.diagonal().amax();
        let mut accepted = false;
        for _ in 0..40 {
            let mut m: DMatrix<f64> = &h + DMatrix::identity(n, n) * (mu * scale);
            let mut rhs = DVector::from_vec(g.clone());
            for i in 0..n {
                if !free[i] {
                    for j in 0..n {
                        m[(i, j)] = if i == j { 1.0 } else { 0.0 };
                        m[(j, i)] = if i == j { 1.0 } else { 0.0 };
                    }
                    rhs[i] = 0.0;
                }
            }
            let step = match m.clone().cholesky() {
                Some(c) => c.solve(&rhs),
                None => {
                    mu *= 8.0;
                    continue;
                }
            };
            let trial = clamp(alpha.iter().zip(step.iter()).map(|(a, d)| a + d).collect());
            let tv = objective(&trial)?;
            if tv > value {
                alpha = trial;
                value = tv;
                mu = (mu / 4.0).max(1e-10);
                accepted = true;
                break;
            }
            mu *= 8.0;
        }
        g = slope(&alpha)?;
        if !accepted {
            let gmax = g
                .iter()
                .zip(&free)
                .filter(|(_, &f)| f)
                .map(|(x, _)| x.abs())
                .fold(0.0, f64::max);
            converged = gmax <= 1e3 * GRADIENT_TOL;
            break;
        }
    }
    let escaping = alpha
        .iter()
        .zip(&g)
        .any(|(a, gi)| a.abs() >= ALPHA_CLAMP && a.signum() * gi > ESCAPE_SLOPE);
    Ok(LegendrePoint {
        value: if escaping { f64::INFINITY } else { value },
        alpha,
        converged,
    })
}

/// `I(s) = sup_α (α·s − e(−α))` on `s_grid`, warm-starting each point from
/// the previous finite maximizer.
pub fn rate_function(cf: &CumulantFunction, s_grid: &[Vec<f64>]) -> Result<RateFunction> {
    let f = |a: &[f64]| cf.e(a);
    let mut start = vec![0.0; cf.dim()];
    let mut points = Vec::with_capacity(s_grid.len());
    for s in s_grid {
        if s.len() != cf.dim() {
            return Err(FluctuationError::Length {
                expected: cf.dim(),
                found: s.len(),
            });
        }
        let p = legendre(&f, s, &start)?;
        if p.is_finite() {
            start.clone_from(&p.alpha);
        }
        points.push(p);
    }
    Ok(RateFunction {
        grid: s_grid.to_vec(),
        points,
        minimizer: cf.mean_rate()?,
    })
}

/// Scalar rate function of the total entropy production, from `ē(a) = e(a𝟙)`.
pub fn entropy_rate_function(cf: &CumulantFunction, s_grid: &[f64]) -> Result<RateFunction> {
    let n = cf.dim();
    let f = |a: &[f64]| cf.e(&vec![a[0]; n]);
    let mut start = vec![0.0];
    let mut points = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let p = legendre(&f, &[s], &start)?;
        if p.is_finite() {
            start.clone_from(&p.alpha);
        }
        points.push(p);
    }
    let mean = gradient(&f, &[0.0], FIRST_STEP)?[0];
    Ok(RateFunction {
        grid: s_grid.iter().map(|&s| vec![s]).collect(),
        points,
        minimizer: vec![-mean],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use mris_probes::fixtures;

    #[test]
    fn gaussian_transform_is_exact() {
        // e(α) = α²/2 − α has I(s) = (s − 1)²/2.
        let f = |a: &[f64]| -> Result<f64> { Ok(0.5 * a[0] * a[0] - a[0]) };
        for s in [-2.0, -1.0, 0.5, 3.0] {
            let p = legendre(&f, &[s], &[0.0]).unwrap();
            assert!(p.converged);
            assert!(
                (p.value - 0.5 * (s - 1.0f64).powi(2)).abs() < 1e-9,
                "{s}: {}",
                p.value
            );
        }
    }

    #[test]
    fn linear_directions_are_infinite() {
        // e(α) = α₁²/2 is flat in α₂, so I is infinite off s₂ = 0.
        let f = |a: &[f64]| -> Result<f64> { Ok(0.5 * a[0] * a[0]) };
        assert!(legendre(&f, &[0.3, 0.0], &[0.0, 0.0]).unwrap().is_finite());
        let p = legendre(&f, &[0.3, 0.1], &[0.0, 0.0]).unwrap();
        assert_eq!(p.value, f64::INFINITY);
    }

    #[test]
    fn rate_vanishes_at_the_mean() {
        let cf = CumulantFunction::new(&fixtures::two_temperature()).unwrap();
        let mean = cf.mean_rate().unwrap();
        let rf = rate_function(&cf, std::slice::from_ref(&mean)).unwrap();
        assert!(rf.points[0].value.abs() < 1e-8, "{}", rf.points[0].value);
        let er = entropy_rate_function(&cf, &[mean.iter().sum()]).unwrap();
        assert!(er.points[0].value.abs() < 1e-8);
    }

    #[test]
    fn duality_holds_at_the_maximizer() {
        let cf = CumulantFunction::new(&fixtures::two_temperature()).unwrap();
        let s = vec![0.05, -0.1];
        let p = &rate_function(&cf, std::slice::from_ref(&s)).unwrap().points[0];
        if p.is_finite() {
            let neg: Vec<f64> = p.alpha.iter().map(|a| -a).collect();
            let dual: f64 = p.alpha.iter().zip(&s).map(|(a, b)| a * b).sum();
            assert!((p.value + cf.e(&neg).unwrap() - dual).abs() < 1e-12);
        }
    }
}
