//! Block families indexed by the probe labels.

use qm_core::matrix::{eigvalsh, hermiticity_residual, hs_inner, to_coords, trace_norm};
use qm_core::{from_coords, ComplexMatrix, DensityMatrix, Tolerances, C64};

use crate::error::{ExtendedError, Result};

/// A family `R(ω)` of positive semidefinite blocks with total trace one.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState {
    dim: usize,
    blocks: Vec<ComplexMatrix>,
}

/// A family `X(ω)` of Hermitian blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedObservable {
    dim: usize,
    blocks: Vec<ComplexMatrix>,
}

fn common_dim(blocks: &[ComplexMatrix]) -> Result<usize> {
    let d = blocks
        .first()
        .map(|b| b.nrows())
        .ok_or(ExtendedError::Mismatch {
            what: "block count",
            expected: 1,
            found: 0,
        })?;
    for b in blocks {
        if b.nrows() != d || b.ncols() != d {
            return Err(ExtendedError::Mismatch {
                what: "block dimension",
                expected: d,
                found: b.nrows().max(b.ncols()),
            });
        }
    }
    Ok(d)
}

impl ExtendedState {
    pub fn new(blocks: Vec<ComplexMatrix>, tol: &Tolerances) -> Result<Self> {
        let dim = common_dim(&blocks)?;
        for (omega, b) in blocks.iter().enumerate() {
            let residual = hermiticity_residual(b);
            if residual > tol.herm {
                return Err(ExtendedError::NotHermitian { omega, residual });
            }
            let min_eig = eigvalsh(b)[0];
            if min_eig < -tol.psd {
                return Err(ExtendedError::NegativeBlock { omega, min_eig });
            }
        }
        let trace: f64 = blocks.iter().map(|b| b.trace().re).sum();
        if (trace - 1.0).abs() > tol.trace {
            return Err(ExtendedError::BadTrace { trace });
        }
        Ok(Self { dim, blocks })
    }

    /// Wraps blocks produced by a trace-preserving positive map from a valid state.
    pub fn from_trusted(blocks: Vec<ComplexMatrix>) -> Self {
        let dim = blocks[0].nrows();
        Self { dim, blocks }
    }

    /// Puts the whole weight on one label: `R(ω) = δ_{ω,at} ρ`.
    pub fn concentrated(n: usize, at: usize, rho: &DensityMatrix) -> Self {
        let d = rho.dim();
        let blocks = (0..n)
            .map(|w| {
                if w == at {
                    rho.matrix().clone()
                } else {
                    ComplexMatrix::zeros(d, d)
                }
            })
            .collect();
        Self { dim: d, blocks }
    }

    pub fn from_coords(x: &[f64], n: usize, d: usize) -> Self {
        Self::from_trusted(blocks_from_coords(x, n, d))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    pub fn block(&self, omega: usize) -> &ComplexMatrix {
        &self.blocks[omega]
    }

    /// `tr R(ω)` for every label.
    pub fn weights(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.trace().re).collect()
    }

    pub fn total_trace(&self) -> f64 {
        self.weights().iter().sum()
    }

    /// `Σ_ω R(ω)`, the reduced state of the system.
    pub fn marginal_state(&self) -> ComplexMatrix {
        self.blocks.iter().sum()
    }

    pub fn min_block_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| eigvalsh(b)[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_coords(&self) -> Vec<f64> {
        blocks_to_coords(&self.blocks)
    }

    /// `‖R − S‖₁ = Σ_ω ‖R(ω) − S(ω)‖₁`.
    pub fn trace_distance(&self, other: &ExtendedState) -> f64 {
        block_trace_norm_diff(&self.blocks, &other.blocks)
    }
}

impl ExtendedObservable {
    pub fn new(blocks: Vec<ComplexMatrix>, tol: &Tolerances) -> Result<Self> {
        let dim = common_dim(&blocks)?;
        for (omega, b) in blocks.iter().enumerate() {
            let residual = hermiticity_residual(b);
            if residual > tol.herm {
                return Err(ExtendedError::NotHermitian { omega, residual });
            }
        }
        Ok(Self { dim, blocks })
    }

    pub(crate) fn from_trusted(blocks: Vec<ComplexMatrix>) -> Self {
        let dim = blocks[0].nrows();
        Self { dim, blocks }
    }

    /// The unit `𝟙(ω) = 1` for every label.
    pub fn identity(n: usize, d: usize) -> Self {
        Self::from_trusted(vec![ComplexMatrix::identity(d, d); n])
    }

    /// `X(ω') = δ_{ω'ω} x`.
    pub fn single(n: usize, omega: usize, x: &ComplexMatrix) -> Self {
        let d = x.nrows();
        let blocks = (0..n)
            .map(|w| {
                if w == omega {
                    x.clone()
                } else {
                    ComplexMatrix::zeros(d, d)
                }
            })
            .collect();
        Self::from_trusted(blocks)
    }

    /// `X(ω) = c_ω 𝟙`.
    pub fn scalars(c: &[f64], d: usize) -> Self {
        Self::from_trusted(
            c.iter()
                .map(|&v| ComplexMatrix::identity(d, d).scale(v))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    pub fn block(&self, omega: usize) -> &ComplexMatrix {
        &self.blocks[omega]
    }

    pub fn to_coords(&self) -> Vec<f64> {
        blocks_to_coords(&self.blocks)
    }

    /// Linear combination `Σ_k c_k X_k` of observables on the same space.
    pub fn combine(terms: &[(f64, &ExtendedObservable)]) -> Self {
        let first = terms[0].1;
        let mut blocks = vec![ComplexMatrix::zeros(first.dim, first.dim); first.len()];
        for (c, x) in terms {
            for (acc, b) in blocks.iter_mut().zip(&x.blocks) {
                *acc += b.scale(*c);
            }
        }
        Self::from_trusted(blocks)
    }
}

/// `⟨R, X⟩ = Σ_ω tr(R(ω)^† X(ω))`.
pub fn pairing(r: &[ComplexMatrix], x: &[ComplexMatrix]) -> C64 {
    r.iter().zip(x).map(|(a, b)| hs_inner(a, b)).sum()
}

/// Real part of the duality pairing of a state with an observable.
pub fn expectation(r: &ExtendedState, x: &ExtendedObservable) -> f64 {
    pairing(&r.blocks, &x.blocks).re
}

/// Concatenated Hermitian-basis coordinates, block after block.
pub fn blocks_to_coords(blocks: &[ComplexMatrix]) -> Vec<f64> {
    blocks.iter().flat_map(to_coords).collect()
}

pub fn blocks_from_coords(x: &[f64], n: usize, d: usize) -> Vec<ComplexMatrix> {
    assert_eq!(x.len(), n * d * d, "coordinate vector has wrong length");
    x.chunks(d * d).map(|c| from_coords(c, d)).collect()
}

pub fn block_trace_norm_diff(a: &[ComplexMatrix], b: &[ComplexMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| trace_norm(&(x - y))).sum()
}
