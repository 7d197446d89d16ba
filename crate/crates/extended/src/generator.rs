//! The generator `(𝕃R)(ω) = Σ_ν P_νω L_ν R(ν)` and its tilted relatives.

use std::sync::OnceLock;

use mris_chain::MarkovChain;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qm_core::matrix::{coords_trace, real_eigenvalues, unvec_col, vec_col};
use qm_core::{choi_verify, ComplexMatrix, DensityMatrix, QuantumChannel, Tolerances};

use crate::error::{ExtendedError, Result};
use crate::state::{blocks_from_coords, blocks_to_coords, ExtendedObservable, ExtendedState};

/// One completely positive map per label together with its two matrix forms.
#[derive(Debug, Clone)]
struct BlockMap {
    superop: ComplexMatrix,
    real: DMatrix<f64>,
}

/// A map on families of `d x d` blocks of the form `Σ_ν P_νω Φ_ν R(ν)`.
///
/// When built by [`build_generator`] the `Φ_ν` are CPTP and this is the
/// generator proper; tilted versions have merely completely positive `Φ_ν`.
/// Coordinates are block-major: index `ω·d² + k` is coordinate `k` of block `ω`.
#[derive(Debug)]
pub struct ExtendedGenerator {
    dim: usize,
    chain: MarkovChain,
    maps: Vec<BlockMap>,
    channels: Option<Vec<QuantumChannel>>,
    real: DMatrix<f64>,
    spectrum: OnceLock<Option<Vec<Complex64>>>,
}

impl Clone for ExtendedGenerator {
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            chain: self.chain.clone(),
            maps: self.maps.clone(),
            channels: self.channels.clone(),
            real: self.real.clone(),
            spectrum: OnceLock::new(),
        }
    }
}

/// The completely positive pieces `L_{ω,ξ}` of one label's map with their
/// entropy increments `δξ`.
#[derive(Debug, Clone)]
pub struct OutcomeMaps {
    increments: Vec<f64>,
    superops: Vec<ComplexMatrix>,
    reals: Vec<DMatrix<f64>>,
}

impl OutcomeMaps {
    pub fn new(pieces: &[(f64, &QuantumChannel)]) -> Self {
        Self {
            increments: pieces.iter().map(|(x, _)| *x).collect(),
            superops: pieces.iter().map(|(_, c)| c.superop().clone()).collect(),
            reals: pieces
                .iter()
                .map(|(_, c)| c.real_matrix().clone())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    fn dim(&self) -> usize {
        (self.superops[0].nrows() as f64).sqrt().round() as usize
    }

    fn weighted(&self, weight: impl Fn(f64) -> f64) -> BlockMap {
        let n = self.superops[0].nrows();
        let mut superop = ComplexMatrix::zeros(n, n);
        let mut real = DMatrix::zeros(n, n);
        for ((dx, s), t) in self.increments.iter().zip(&self.superops).zip(&self.reals) {
            let w = weight(*dx);
            if w != 0.0 {
                superop += s.scale(w);
                real += t.scale(w);
            }
        }
        BlockMap { superop, real }
    }
}

fn assemble(chain: &MarkovChain, maps: &[BlockMap], d: usize) -> DMatrix<f64> {
    let n = chain.len();
    let m = d * d;
    let p = chain.p();
    let mut big = DMatrix::zeros(n * m, n * m);
    for omega in 0..n {
        for nu in 0..n {
            let w = p[(nu, omega)];
            if w != 0.0 {
                big.view_mut((omega * m, nu * m), (m, m))
                    .copy_from(&maps[nu].real.scale(w));
            }
        }
    }
    big
}

fn check_count(chain: &MarkovChain, found: usize) -> Result<()> {
    if found != chain.len() {
        return Err(ExtendedError::Mismatch {
            what: "number of maps versus chain labels",
            expected: chain.len(),
            found,
        });
    }
    Ok(())
}

impl ExtendedGenerator {
    fn from_maps(
        chain: MarkovChain,
        maps: Vec<BlockMap>,
        dim: usize,
        channels: Option<Vec<QuantumChannel>>,
    ) -> Self {
        let real = assemble(&chain, &maps, dim);
        Self {
            dim,
            chain,
            maps,
            channels,
            real,
            spectrum: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn omega_count(&self) -> usize {
        self.chain.len()
    }

    /// Dimension `|Ω|·d²` of the real coordinate space.
    pub fn size(&self) -> usize {
        self.real.nrows()
    }

    pub fn chain(&self) -> &MarkovChain {
        &self.chain
    }

    /// The per-label channels, present for generators built from CPTP maps.
    pub fn channels(&self) -> Option<&[QuantumChannel]> {
        self.channels.as_deref()
    }

    pub fn block_superop(&self, omega: usize) -> &ComplexMatrix {
        &self.maps[omega].superop
    }

    pub fn block_real(&self, omega: usize) -> &DMatrix<f64> {
        &self.maps[omega].real
    }

    /// Real matrix in block-major Hermitian-basis coordinates.
    pub fn real_matrix(&self) -> &DMatrix<f64> {
        &self.real
    }

    /// Complex matrix acting on stacked column-vectorized blocks.
    pub fn complex_matrix(&self) -> ComplexMatrix {
        let n = self.omega_count();
        let m = self.dim * self.dim;
        let p = self.chain.p();
        let mut big = ComplexMatrix::zeros(n * m, n * m);
        for omega in 0..n {
            for nu in 0..n {
                let w = p[(nu, omega)];
                if w != 0.0 {
                    big.view_mut((omega * m, nu * m), (m, m))
                        .copy_from(&self.maps[nu].superop.scale(w));
                }
            }
        }
        big
    }

    /// Same maps driven by another chain on the same labels.
    pub fn with_chain(&self, chain: MarkovChain) -> Result<Self> {
        check_count(&chain, self.omega_count())?;
        Ok(Self::from_maps(
            chain,
            self.maps.clone(),
            self.dim,
            self.channels.clone(),
        ))
    }

    /// Blockwise action on arbitrary (not necessarily Hermitian) families.
    pub fn apply_blocks(&self, r: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        let n = self.omega_count();
        let d = self.dim;
        let images: Vec<_> = r
            .iter()
            .zip(&self.maps)
            .map(|(b, m)| unvec_col(&(&m.superop * vec_col(b)), d))
            .collect();
        let p = self.chain.p();
        (0..n)
            .map(|omega| {
                let mut acc = ComplexMatrix::zeros(d, d);
                for (nu, img) in images.iter().enumerate() {
                    let w = p[(nu, omega)];
                    if w != 0.0 {
                        acc += img.scale(w);
                    }
                }
                acc
            })
            .collect()
    }

    /// Action on real coordinates.
    pub fn apply_coords(&self, x: &[f64]) -> Vec<f64> {
        let v = &self.real * DVector::from_column_slice(x);
        v.as_slice().to_vec()
    }

    /// Action on an extended state; for a generator built from channels the
    /// image is again a state.
    pub fn apply(&self, r: &ExtendedState) -> ExtendedState {
        ExtendedState::from_coords(
            &self.apply_coords(&r.to_coords()),
            self.omega_count(),
            self.dim,
        )
    }

    /// Dual action `(𝕃*X)(ω) = Σ_ν P_ων Φ_ω*(X(ν))`.
    pub fn adjoint_blocks(&self, x: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        let n = self.omega_count();
        let d = self.dim;
        let p = self.chain.p();
        (0..n)
            .map(|omega| {
                let mut mixed = ComplexMatrix::zeros(d, d);
                for (nu, b) in x.iter().enumerate() {
                    let w = p[(omega, nu)];
                    if w != 0.0 {
                        mixed += b.scale(w);
                    }
                }
                unvec_col(&(self.maps[omega].superop.adjoint() * vec_col(&mixed)), d)
            })
            .collect()
    }

    pub fn adjoint(&self, x: &ExtendedObservable) -> ExtendedObservable {
        ExtendedObservable::from_trusted(
            self.adjoint_blocks(x.blocks())
                .iter()
                .map(qm_core::matrix::hermitize)
                .collect(),
        )
    }

    /// Largest deviation of `⟨𝕃R, 𝟙⟩ − ⟨R, 𝟙⟩` over the coordinate basis.
    pub fn trace_residual(&self) -> f64 {
        let d = self.dim;
        let m = d * d;
        let size = self.size();
        let unit: Vec<f64> = (0..size)
            .map(|k| if k % m < d { 1.0 } else { 0.0 })
            .collect();
        let pulled = self.real.transpose() * DVector::from_column_slice(&unit);
        pulled
            .iter()
            .zip(&unit)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues of the real matrix, cached after the first call.
    pub fn eigenvalues(&self) -> Result<&[Complex64]> {
        self.spectrum
            .get_or_init(|| real_eigenvalues(&self.real))
            .as_deref()
            .ok_or(ExtendedError::EigenSolver)
    }

    pub fn coords_of(&self, r: &[ComplexMatrix]) -> Vec<f64> {
        blocks_to_coords(r)
    }

    pub fn blocks_of(&self, x: &[f64]) -> Vec<ComplexMatrix> {
        blocks_from_coords(x, self.omega_count(), self.dim)
    }

    /// Total trace of a coordinate vector.
    pub fn coords_total_trace(&self, x: &[f64]) -> f64 {
        let m = self.dim * self.dim;
        x.chunks(m).map(|c| coords_trace(c, self.dim)).sum()
    }
}

/// Assembles the generator from one CPTP channel per chain label.
///
/// Each channel is checked for complete positivity through its Choi matrix
/// and for trace preservation, which together make the block map CPTP.
pub fn build_generator(
    chain: &MarkovChain,
    channels: &[QuantumChannel],
) -> Result<ExtendedGenerator> {
    build_generator_with(chain, channels, &Tolerances::default())
}

pub fn build_generator_with(
    chain: &MarkovChain,
    channels: &[QuantumChannel],
    tol: &Tolerances,
) -> Result<ExtendedGenerator> {
    check_count(chain, channels.len())?;
    let d = channels[0].dim();
    let mut maps = Vec::with_capacity(channels.len());
    for (omega, ch) in channels.iter().enumerate() {
        if ch.dim() != d {
            return Err(ExtendedError::Mismatch {
                what: "channel dimension",
                expected: d,
                found: ch.dim(),
            });
        }
        let report = choi_verify(ch);
        if report.min_choi_eig < -tol.psd {
            return Err(ExtendedError::NotCompletelyPositive {
                omega,
                min_eig: report.min_choi_eig,
            });
        }
        if report.tp_residual > tol.tp {
            return Err(ExtendedError::NotTracePreserving {
                residual: report.tp_residual,
            });
        }
        maps.push(BlockMap {
            superop: ch.superop().clone(),
            real: ch.real_matrix().clone(),
        });
    }
    Ok(ExtendedGenerator::from_maps(
        chain.clone(),
        maps,
        d,
        Some(channels.to_vec()),
    ))
}

/// `Σ_ν P_νω Σ_ξ w(ν, δξ) L_{ν,ξ} R(ν)` for an arbitrary weight function.
pub fn tilted_generator(
    chain: &MarkovChain,
    outcomes: &[OutcomeMaps],
    weight: impl Fn(usize, f64) -> f64,
) -> Result<ExtendedGenerator> {
    check_count(chain, outcomes.len())?;
    let d = outcomes[0].dim();
    let maps = outcomes
        .iter()
        .enumerate()
        .map(|(nu, o)| o.weighted(|dx| weight(nu, dx)))
        .collect();
    Ok(ExtendedGenerator::from_maps(chain.clone(), maps, d, None))
}

/// The deformed generator with `L_ν^{[α_ν]} = Σ_ξ e^{−α_ν δξ} L_{ν,ξ}`.
pub fn deformed_generator(
    chain: &MarkovChain,
    outcomes: &[OutcomeMaps],
    alpha: &[f64],
) -> Result<ExtendedGenerator> {
    check_count(chain, alpha.len())?;
    tilted_generator(chain, outcomes, |nu, dx| (-alpha[nu] * dx).exp())
}

/// `D_μ = −∂_{α_μ} 𝕃^{[α]}` at `α = 0`: only label `μ` contributes, weighted by `δξ`.
pub fn increment_generator(
    chain: &MarkovChain,
    outcomes: &[OutcomeMaps],
    mu: usize,
) -> Result<ExtendedGenerator> {
    tilted_generator(chain, outcomes, |nu, dx| if nu == mu { dx } else { 0.0 })
}

/// `R₀(ω) = Σ_ν π_ν P_νω ρ_ν`.
pub fn initial_extended_state(
    chain: &MarkovChain,
    rho_init: &[DensityMatrix],
) -> Result<ExtendedState> {
    check_count(chain, rho_init.len())?;
    let d = rho_init[0].dim();
    let n = chain.len();
    let p = chain.p();
    let pi = chain.pi();
    let mut blocks = vec![ComplexMatrix::zeros(d, d); n];
    for (nu, rho) in rho_init.iter().enumerate() {
        if rho.dim() != d {
            return Err(ExtendedError::Mismatch {
                what: "initial state dimension",
                expected: d,
                found: rho.dim(),
            });
        }
        for (omega, b) in blocks.iter_mut().enumerate() {
            let w = pi[nu] * p[(nu, omega)];
            if w != 0.0 {
                *b += rho.matrix().scale(w);
            }
        }
    }
    Ok(ExtendedState::from_trusted(blocks))
}

/// `𝕃ⁿR`.
pub fn evolve(g: &ExtendedGenerator, r: &ExtendedState, n: usize) -> ExtendedState {
    if n == 0 {
        return r.clone();
    }
    let mut x = r.to_coords();
    for _ in 0..n {
        x = g.apply_coords(&x);
    }
    ExtendedState::from_coords(&x, g.omega_count(), g.dim())
}
