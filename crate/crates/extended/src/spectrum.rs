//! Spectral analysis of the generator: classification, steady states and the
//! dominant eigen-pair of tilted generators.

use mris_chain::MarkovChain;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qm_core::matrix::{eigh, hermitize, max_abs_diff};
use qm_core::{ComplexMatrix, DensityMatrix, Tolerances};

use crate::error::{ExtendedError, Result};
use crate::generator::ExtendedGenerator;
use crate::state::{block_trace_norm_diff, ExtendedObservable, ExtendedState};

/// Eigenvalues within this distance of a target are counted as equal to it.
pub const SIMPLICITY_TOL: f64 = 1e-8;
/// Minimal normalized overlap of left and right eigenvectors of a simple eigenvalue.
pub const OVERLAP_TOL: f64 = 1e-8;
/// Eigenvalues with `||z| − 1|` below this are peripheral.
pub const PERIPHERAL_TOL: f64 = 1e-8;
/// A gap below this is treated as no gap.
pub const GAP_TOL: f64 = 1e-8;
/// Chain weights at or below this are treated as zero.
pub const PI_FLOOR: f64 = 1e-12;
/// Negative steady-state eigenvalues above `−ESS_CLIP` are round-off and clipped.
pub const ESS_CLIP: f64 = 1e-10;
/// Smallest block eigenvalue accepted as strictly positive.
pub const FAITHFUL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    Reducible,
    IrreduciblePeriodic,
    Primitive,
}

#[derive(Debug, Clone)]
pub struct GeneratorClassification {
    pub kind: GeneratorKind,
    /// Number of peripheral eigenvalues when irreducible, 0 otherwise.
    pub period: usize,
    /// `Δ = −log max{|z| : z not peripheral}`; infinite when every eigenvalue is peripheral.
    pub gap: f64,
    /// Spectral radius.
    pub dominant_eigenvalue: f64,
    /// Number of eigenvalues within [`SIMPLICITY_TOL`] of 1.
    pub multiplicity_one: usize,
    /// Normalized overlap of left and right fixed vectors (0 unless the count above is 1).
    pub left_right_overlap: f64,
    /// Largest `|z^p − 1|` over peripheral eigenvalues, `p` the period.
    pub roots_of_unity_residual: f64,
    /// Whether every block of the steady state is positive definite.
    pub faithful: bool,
    pub ess: Option<ExtendedState>,
    /// Left fixed point normalized against the steady state (the unit when not simple).
    pub left_fixed: ExtendedObservable,
    pub eigenvalues: Vec<Complex64>,
}

impl GeneratorClassification {
    pub fn is_irreducible(&self) -> bool {
        self.kind != GeneratorKind::Reducible
    }

    pub fn is_primitive(&self) -> bool {
        self.kind == GeneratorKind::Primitive
    }
}

/// Singular vector of the smallest singular value, i.e. the numerical kernel
/// direction of a nearly singular square matrix.
fn kernel_vector(a: DMatrix<f64>) -> DVector<f64> {
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let (k, _) =
        svd.singular_values
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |(bk, bv), (k, &s)| if s < bv { (k, s) } else { (bk, bv) },
            );
    v_t.row(k).transpose()
}

fn shifted(a: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let n = a.nrows();
    a - DMatrix::identity(n, n) * lambda
}

fn count_near(eigs: &[Complex64], target: Complex64, tol: f64) -> usize {
    eigs.iter().filter(|z| (*z - target).norm() <= tol).count()
}

/// Turns a kernel vector into a state: fix sign and scale by the total trace,
/// Hermitize each block and clip round-off negativity.
fn vector_to_state(g: &ExtendedGenerator, v: &DVector<f64>) -> Result<ExtendedState> {
    let total = g.coords_total_trace(v.as_slice());
    if total.abs() < 1e-14 {
        return Err(ExtendedError::NoTrace);
    }
    let scaled: Vec<f64> = v.iter().map(|x| x / total).collect();
    let mut blocks = Vec::with_capacity(g.omega_count());
    for b in g.blocks_of(&scaled) {
        let h = hermitize(&b);
        let (vals, vecs) = eigh(&h);
        if vals[0] < -ESS_CLIP {
            return Err(ExtendedError::NegativeSteadyState { min_eig: vals[0] });
        }
        if vals[0] < 0.0 {
            let d = h.nrows();
            let mut fixed = ComplexMatrix::zeros(d, d);
            for (k, &lam) in vals.iter().enumerate() {
                let col = vecs.column(k);
                fixed += (col * col.adjoint()).scale(lam.max(0.0));
            }
            blocks.push(fixed);
        } else {
            blocks.push(h);
        }
    }
    let total: f64 = blocks.iter().map(|b| b.trace().re).sum();
    Ok(ExtendedState::from_trusted(
        blocks.iter().map(|b| b.unscale(total)).collect(),
    ))
}

/// Fixed point of a generator whose eigenvalue 1 is simple.
pub fn find_ess(g: &ExtendedGenerator) -> Result<ExtendedState> {
    let eigs = g.eigenvalues()?;
    let multiplicity = count_near(eigs, Complex64::new(1.0, 0.0), SIMPLICITY_TOL);
    if multiplicity != 1 {
        return Err(ExtendedError::NotSimple { multiplicity });
    }
    let v = kernel_vector(shifted(g.real_matrix(), 1.0));
    vector_to_state(g, &v)
}

/// `‖𝕃R − R‖₁`.
pub fn fixed_point_residual(g: &ExtendedGenerator, r: &ExtendedState) -> f64 {
    block_trace_norm_diff(g.apply(r).blocks(), r.blocks())
}

/// Spectral classification of a CPTP generator.
pub fn classify_generator(g: &ExtendedGenerator) -> Result<GeneratorClassification> {
    let eigs = g.eigenvalues()?.to_vec();
    let one = Complex64::new(1.0, 0.0);
    let multiplicity_one = count_near(&eigs, one, SIMPLICITY_TOL);
    let radius = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let peripheral: Vec<Complex64> = eigs
        .iter()
        .copied()
        .filter(|z| (z.norm() - 1.0).abs() <= PERIPHERAL_TOL)
        .collect();
    let inner = eigs
        .iter()
        .filter(|z| (z.norm() - 1.0).abs() > PERIPHERAL_TOL)
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let gap = if inner > 0.0 {
        -inner.ln()
    } else {
        f64::INFINITY
    };

    let mut left_right_overlap = 0.0;
    let mut ess = None;
    let mut left_fixed = ExtendedObservable::identity(g.omega_count(), g.dim());
    let mut faithful = false;
    if multiplicity_one == 1 {
        let r = kernel_vector(shifted(g.real_matrix(), 1.0));
        let l = kernel_vector(shifted(&g.real_matrix().transpose(), 1.0));
        left_right_overlap = l.dot(&r).abs() / (l.norm() * r.norm());
        if let Ok(state) = vector_to_state(g, &r) {
            faithful = state.min_block_eigenvalue() > FAITHFUL_TOL;
            let norm = l.dot(&DVector::from_column_slice(&state.to_coords()));
            if norm.abs() > 0.0 {
                let scaled: Vec<f64> = l.iter().map(|x| x / norm).collect();
                left_fixed = ExtendedObservable::from_trusted(g.blocks_of(&scaled));
            }
            ess = Some(state);
        }
    }

    let simple = multiplicity_one == 1 && left_right_overlap > OVERLAP_TOL;
    let irreducible = simple && faithful;
    let period = if irreducible { peripheral.len() } else { 0 };
    let roots_of_unity_residual = if period > 0 {
        peripheral
            .iter()
            .map(|z| (z.powu(period as u32) - one).norm())
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let kind = if !irreducible {
        GeneratorKind::Reducible
    } else if period == 1 && gap > GAP_TOL {
        GeneratorKind::Primitive
    } else {
        GeneratorKind::IrreduciblePeriodic
    };
    Ok(GeneratorClassification {
        kind,
        period,
        gap,
        dominant_eigenvalue: radius,
        multiplicity_one,
        left_right_overlap,
        roots_of_unity_residual,
        faithful,
        ess,
        left_fixed,
        eigenvalues: eigs,
    })
}

/// `R_+ ↦ (π_+, ρ_+)` with `π_{+ω} = tr R_+(ω)` and `ρ_{+ω} = L_ω R_+(ω)/π_{+ω}`.
#[derive(Debug, Clone)]
pub struct EssDecomposition {
    pub pi_plus: Vec<f64>,
    pub rho_plus: Vec<DensityMatrix>,
    /// `max_ω max|Σ_ν P_νω π_{+ν} ρ_{+ν} − R_+(ω)|`.
    pub reconstruction_residual: f64,
}

pub fn ess_decompose(g: &ExtendedGenerator, r_plus: &ExtendedState) -> Result<EssDecomposition> {
    let residual = fixed_point_residual(g, r_plus);
    if residual > 1e-8 {
        return Err(ExtendedError::NotFixed { residual });
    }
    let d = g.dim();
    let n = g.omega_count();
    let tol = Tolerances::default();
    let pi_plus = r_plus.weights();
    let mut rho_plus = Vec::with_capacity(n);
    for omega in 0..n {
        let rho = if pi_plus[omega] > PI_FLOOR {
            let img = qm_core::matrix::unvec_col(
                &(g.block_superop(omega) * qm_core::matrix::vec_col(r_plus.block(omega))),
                d,
            );
            DensityMatrix::normalized(hermitize(&img), &tol)?
        } else {
            DensityMatrix::maximally_mixed(d)
        };
        rho_plus.push(rho);
    }
    let reconstruction_residual = reconstruction_residual(g.chain(), &pi_plus, &rho_plus, r_plus);
    Ok(EssDecomposition {
        pi_plus,
        rho_plus,
        reconstruction_residual,
    })
}

fn reconstruction_residual(
    chain: &MarkovChain,
    pi: &[f64],
    rho: &[DensityMatrix],
    r: &ExtendedState,
) -> f64 {
    let n = chain.len();
    let d = r.dim();
    let mut worst = 0.0_f64;
    for omega in 0..n {
        let mut acc = ComplexMatrix::zeros(d, d);
        for nu in 0..n {
            acc += rho[nu].matrix().scale(chain.p()[(nu, omega)] * pi[nu]);
        }
        worst = worst.max(max_abs_diff(&acc, r.block(omega)));
    }
    worst
}

/// Perron–Frobenius data of a completely positive generator.
#[derive(Debug, Clone)]
pub struct DominantPair {
    /// Spectral radius `ℓ`.
    pub value: f64,
    /// Right eigenvector in coordinates, normalized to total trace 1.
    pub right: Vec<f64>,
    /// Left eigenvector in coordinates, normalized so that `⟨left, right⟩ = 1`.
    pub left: Vec<f64>,
}

/// Largest-modulus eigenvalue, which must be real and positive, with its
/// eigenvectors. The eigenvalue is refined by the two-sided Rayleigh quotient.
pub fn dominant_pair(g: &ExtendedGenerator) -> Result<DominantPair> {
    let eigs = g.eigenvalues()?;
    let radius = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let candidate = eigs
        .iter()
        .filter(|z| z.norm() >= radius * (1.0 - 1e-10))
        .copied()
        .fold(Complex64::new(f64::NEG_INFINITY, 0.0), |best, z| {
            if z.re > best.re {
                z
            } else {
                best
            }
        });
    if candidate.re <= 0.0 || candidate.im.abs() > 1e-10 * radius.max(1.0) {
        return Err(ExtendedError::BadDominant { value: candidate });
    }
    let a = g.real_matrix();
    let r = kernel_vector(shifted(a, candidate.re));
    let l = kernel_vector(shifted(&a.transpose(), candidate.re));
    let lr = l.dot(&r);
    if lr.abs() < 1e-300 {
        return Err(ExtendedError::BadDominant { value: candidate });
    }
    let value = l.dot(&(a * &r)) / lr;
    let total = g.coords_total_trace(r.as_slice());
    let right: Vec<f64> = r.iter().map(|x| x / total).collect();
    let left: Vec<f64> = l.iter().map(|x| x * total / lr).collect();
    Ok(DominantPair { value, right, left })
}
