//! Symmetries of the cumulant generating function.

use mris_chain::classify_chain;
use mris_probes::check_tri;

use crate::cumulant::CumulantFunction;
use crate::error::Result;

/// Verdict threshold of both symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    pub max_residual: f64,
    /// Residual at every probed point, in input order.
    pub residuals: Vec<f64>,
    pub holds: bool,
    /// Whether time-reversal data were supplied and verified.
    pub tri_holds: bool,
    pub detailed_balance: bool,
}

fn finish(residuals: Vec<f64>, tri_holds: bool, detailed_balance: bool) -> SymmetryReport {
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    SymmetryReport {
        holds: max_residual <= SYMMETRY_TOL,
        max_residual,
        residuals,
        tri_holds,
        detailed_balance,
    }
}

fn preconditions(cf: &CumulantFunction) -> (bool, bool) {
    let tri = check_tri(cf.model()).map(|r| r.holds).unwrap_or(false);
    let db = classify_chain(cf.model().chain()).detailed_balance;
    (tri, db)
}

/// `|e(𝟙 − α) − e(α)|` on every grid point.
pub fn gc_symmetry_report(cf: &CumulantFunction, alphas: &[Vec<f64>]) -> Result<SymmetryReport> {
    let reflected: Vec<Vec<f64>> = alphas
        .iter()
        .map(|a| a.iter().map(|x| 1.0 - x).collect())
        .collect();
    let lhs = cf.e_many(alphas)?;
    let rhs = cf.e_many(&reflected)?;
    let residuals = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).collect();
    let (tri, db) = preconditions(cf);
    Ok(finish(residuals, tri, db))
}

/// `|e(α + γβ⁻¹) − e(α)|` on the product grid, with `β` the model's inverse
/// temperatures.
pub fn translation_symmetry_report(
    cf: &CumulantFunction,
    alphas: &[Vec<f64>],
    gammas: &[f64],
) -> Result<SymmetryReport> {
    let inv_beta: Vec<f64> = cf.model().betas().iter().map(|b| 1.0 / b).collect();
    let mut base = Vec::new();
    let mut moved = Vec::new();
    for a in alphas {
        for &g in gammas {
            base.push(a.clone());
            moved.push(
                a.iter()
                    .zip(&inv_beta)
                    .map(|(x, ib)| x + g * ib)
                    .collect::<Vec<f64>>(),
            );
        }
    }
    let lhs = cf.e_many(&moved)?;
    let rhs = cf.e_many(&base)?;
    let residuals = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).collect();
    let (tri, db) = preconditions(cf);
    Ok(finish(residuals, tri, db))
}
