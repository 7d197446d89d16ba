//! Completely positive maps in Kraus and superoperator form.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;

use crate::error::{QmError, Result};
use crate::matrix::{
    eigh, eigvalsh, env_matrix_element, hermitize, max_abs, superop_to_real, tensor, unvec_col,
    vec_col, ComplexMatrix, C64, ZERO,
};
use crate::state::{DensityMatrix, Tolerances, UnitaryPropagator};

/// A completely positive map `ρ ↦ Σ_j K_j ρ K_j^†` on `d x d` matrices.
///
/// Both representations are kept: the Kraus family and the column-stacking
/// superoperator `Σ_j conj(K_j) ⊗ K_j`. The real matrix of the map in the
/// orthonormal Hermitian basis is cached as well, since spectral work is
/// done there.
#[derive(Debug, Clone)]
pub struct QuantumChannel {
    dim: usize,
    kraus: Vec<ComplexMatrix>,
    superop: ComplexMatrix,
    real: DMatrix<f64>,
}

impl QuantumChannel {
    /// Builds a CPTP map, rejecting families that fail `Σ K^†K = 1` within `tol.tp`.
    pub fn from_kraus(kraus: Vec<ComplexMatrix>, tol: &Tolerances) -> Result<Self> {
        let ch = Self::cp_from_kraus(kraus)?;
        let residual = ch.tp_residual();
        if residual > tol.tp {
            return Err(QmError::NotTracePreserving { residual });
        }
        Ok(ch)
    }

    /// Builds a completely positive map without requiring trace preservation.
    pub fn cp_from_kraus(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let first = kraus.first().ok_or(QmError::EmptyKraus)?;
        let dim = first.nrows();
        for k in &kraus {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(QmError::DimensionMismatch {
                    context: "Kraus operator",
                    expected: dim,
                    found: k.nrows().max(k.ncols()),
                });
            }
        }
        let mut superop = ComplexMatrix::zeros(dim * dim, dim * dim);
        for k in &kraus {
            superop += tensor(&k.map(|z| z.conj()), k);
        }
        let real = superop_to_real(&superop, dim);
        Ok(Self {
            dim,
            kraus,
            superop,
            real,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::cp_from_kraus(vec![ComplexMatrix::identity(d, d)]).expect("nonempty")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn superop(&self) -> &ComplexMatrix {
        &self.superop
    }

    /// Matrix of the map in the orthonormal Hermitian basis (see [`crate::matrix::hermitian_basis`]).
    pub fn real_matrix(&self) -> &DMatrix<f64> {
        &self.real
    }

    /// Action through the Kraus family.
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        out
    }

    /// Action through the superoperator.
    pub fn apply_superop(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        unvec_col(&(&self.superop * vec_col(rho)), self.dim)
    }

    /// Heisenberg-picture dual `X ↦ Σ_j K_j^† X K_j`.
    pub fn apply_dual(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            out += k.adjoint() * x * k;
        }
        out
    }

    /// Applies the channel to a validated state and re-validates the image.
    pub fn apply_state(&self, rho: &DensityMatrix, tol: &Tolerances) -> Result<DensityMatrix> {
        DensityMatrix::new(hermitize(&self.apply(rho.matrix())), tol)
    }

    /// `max |Σ K^†K − 1|`.
    pub fn tp_residual(&self) -> f64 {
        let mut s = ComplexMatrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            s += k.adjoint() * k;
        }
        max_abs(&(s - ComplexMatrix::identity(self.dim, self.dim)))
    }

    /// Largest disagreement between Kraus and superoperator actions on the matrix units.
    pub fn consistency_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                let mut e = ComplexMatrix::zeros(d, d);
                e[(i, j)] = C64::new(1.0, 0.0);
                worst = worst.max(max_abs(&(self.apply(&e) - self.apply_superop(&e))));
            }
        }
        worst
    }

    /// Weighted sum `Σ_i w_i Φ_i` of maps sharing a dimension (Kraus families concatenated).
    pub fn convex_combination(maps: &[(&QuantumChannel, f64)]) -> Result<Self> {
        let mut kraus = Vec::new();
        for (m, w) in maps {
            if *w <= 0.0 {
                continue;
            }
            let s = w.sqrt();
            kraus.extend(m.kraus.iter().map(|k| k.scale(s)));
        }
        Self::cp_from_kraus(kraus)
    }

    /// Dimension of the linear span of the Kraus operators.
    pub fn kraus_span_rank(&self) -> usize {
        let d2 = self.dim * self.dim;
        let cols: Vec<DVector<C64>> = self.kraus.iter().map(vec_col).collect();
        let m = DMatrix::from_columns(&cols);
        let sv = m.svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        sv.iter()
            .filter(|&&s| s > 1e-10 * smax.max(1.0))
            .count()
            .min(d2)
    }

    /// Whether `Φ(ρ) > 0` for every nonzero `ρ ≥ 0`.
    ///
    /// A Kraus span of full dimension `d²` settles the question. Otherwise the
    /// function `(ψ, φ) ↦ ⟨φ|Φ(|ψ⟩⟨ψ|)|φ⟩` is minimized by alternating
    /// eigenvector updates from several starts; the map is reported positivity
    /// improving when the minimum stays above `tol`.
    pub fn is_positivity_improving(&self, tol: f64) -> bool {
        if self.kraus_span_rank() == self.dim * self.dim {
            return true;
        }
        self.min_pure_output_overlap(32) > tol
    }

    fn min_pure_output_overlap(&self, starts: usize) -> f64 {
        let d = self.dim;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let mut best = f64::INFINITY;
        for s in 0..starts {
            let mut psi = if s < d {
                let mut v = DVector::from_element(d, ZERO);
                v[s] = C64::new(1.0, 0.0);
                v
            } else {
                crate::random::random_matrix(&mut rng, d)
                    .column(0)
                    .into_owned()
            };
            psi /= C64::new(psi.norm(), 0.0);
            let mut value = f64::INFINITY;
            for _ in 0..200 {
                let out = self.apply(&(&psi * psi.adjoint()));
                let (vals, vecs) = eigh(&out);
                let phi = vecs.column(0).into_owned();
                let back = self.apply_dual(&(&phi * phi.adjoint()));
                let (bvals, bvecs) = eigh(&back);
                psi = bvecs.column(0).into_owned();
                let next = bvals[0].min(vals[0]);
                if (value - next).abs() < 1e-15 {
                    value = next;
                    break;
                }
                value = next;
            }
            best = best.min(value);
        }
        best
    }
}

/// One term of the environment-resolved Kraus family of a reduced map:
/// `op = ⟨φ_out|_E U |φ_in⟩_E`, to be weighted by `sqrt(p_in)`.
#[derive(Debug, Clone)]
pub struct EnvKraus {
    pub input: usize,
    pub output: usize,
    pub op: ComplexMatrix,
}

/// Eigen-resolved Kraus data of `ρ ↦ tr_E(U(ρ ⊗ ρ_E)U^†)`.
#[derive(Debug, Clone)]
pub struct EnvKrausFamily {
    /// Eigenvalues `p_k` of `ρ_E`, ascending.
    pub env_weights: Vec<f64>,
    /// Eigenvectors of `ρ_E` as columns.
    pub env_vectors: ComplexMatrix,
    pub terms: Vec<EnvKraus>,
}

/// Kraus family in the eigenbasis `{φ_k}` of `ρ_E = Σ p_k |φ_k⟩⟨φ_k|`:
/// `⟨χ, V_{k,k'} ψ⟩ = sqrt(p_k) ⟨χ ⊗ φ_{k'}, U ψ ⊗ φ_k⟩`.
/// Terms with `p_k ≤ 0` are dropped.
pub fn env_kraus_family(
    u: &ComplexMatrix,
    rho_env: &ComplexMatrix,
    ds: usize,
) -> Result<EnvKrausFamily> {
    let de = rho_env.nrows();
    if u.nrows() != ds * de || u.ncols() != ds * de {
        return Err(QmError::DimensionMismatch {
            context: "reduced_map",
            expected: ds * de,
            found: u.nrows(),
        });
    }
    let (weights, vectors) = eigh(rho_env);
    let mut terms = Vec::with_capacity(de * de);
    for (k, &p) in weights.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let phi_in = vectors.column(k).into_owned();
        for kk in 0..de {
            let phi_out = vectors.column(kk).into_owned();
            terms.push(EnvKraus {
                input: k,
                output: kk,
                op: env_matrix_element(u, &phi_out, &phi_in, ds, de),
            });
        }
    }
    Ok(EnvKrausFamily {
        env_weights: weights,
        env_vectors: vectors,
        terms,
    })
}

/// The reduced dynamics `ρ ↦ tr_E(U(ρ ⊗ ρ_E)U^†)` as a Kraus channel.
pub fn reduced_map(
    u: &UnitaryPropagator,
    rho_env: &DensityMatrix,
    ds: usize,
) -> Result<QuantumChannel> {
    let fam = env_kraus_family(u.matrix(), rho_env.matrix(), ds)?;
    let kraus = fam
        .terms
        .iter()
        .map(|t| t.op.scale(fam.env_weights[t.input].sqrt()))
        .collect();
    QuantumChannel::cp_from_kraus(kraus)
}

/// Choi diagnostics of a linear map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChoiReport {
    pub min_choi_eig: f64,
    pub tp_residual: f64,
}

impl ChoiReport {
    pub fn is_cptp(&self, tol: &Tolerances) -> bool {
        self.min_choi_eig >= -tol.psd && self.tp_residual <= tol.tp
    }
}

/// Choi matrix `C = Σ_{ij} Φ(E_ij) ⊗ E_ij` of a map given by its superoperator.
pub fn choi_matrix(superop: &ComplexMatrix, d: usize) -> ComplexMatrix {
    DMatrix::from_fn(d * d, d * d, |r, c| {
        let (a, i) = (r / d, r % d);
        let (b, j) = (c / d, c % d);
        superop[(a + b * d, i + j * d)]
    })
}

/// Choi positivity margin and trace-preservation residual of any superoperator.
pub fn choi_report(superop: &ComplexMatrix, d: usize) -> ChoiReport {
    let c = choi_matrix(superop, d);
    let min_choi_eig = eigvalsh(&hermitize(&c))[0];
    // tr Φ(E_ij) = Σ_a S[a + a d, i + j d] must equal δ_ij.
    let mut tp_residual = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            let t: C64 = (0..d).map(|a| superop[(a + a * d, i + j * d)]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            tp_residual = tp_residual.max((t - C64::new(want, 0.0)).norm());
        }
    }
    ChoiReport {
        min_choi_eig,
        tp_residual,
    }
}

pub fn choi_verify(ch: &QuantumChannel) -> ChoiReport {
    let mut r = choi_report(ch.superop(), ch.dim());
    r.tp_residual = r.tp_residual.max(ch.tp_residual());
    r
}
