//! Validated states, observables and propagators.

use crate::error::{QmError, Result};
use crate::matrix::{
    eigh, eigvalsh, ensure_square, hermitian_function, hermitian_function_complex,
    hermiticity_residual, hermitize, max_abs_diff, ComplexMatrix, C64,
};

/// Numerical tolerances shared by the validating constructors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub herm: f64,
    pub trace: f64,
    pub psd: f64,
    pub tp: f64,
    pub unit: f64,
    pub degeneracy: f64,
    pub consistency: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-10,
            trace: 1e-10,
            psd: 1e-10,
            tp: 1e-12,
            unit: 1e-10,
            degeneracy: 1e-9,
            consistency: 1e-12,
        }
    }
}

/// A self-adjoint operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    matrix: ComplexMatrix,
}

impl Observable {
    pub fn new(matrix: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        ensure_square(&matrix)?;
        let residual = hermiticity_residual(&matrix);
        if residual > tol.herm {
            return Err(QmError::NotHermitian { residual });
        }
        Ok(Self {
            matrix: hermitize(&matrix),
        })
    }

    /// Hermitizes without checking; for operators Hermitian by construction.
    pub fn from_hermitian_part(matrix: &ComplexMatrix) -> Self {
        Self {
            matrix: hermitize(matrix),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// `tr(ρ X)`.
    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        (rho.matrix() * &self.matrix).trace().re
    }
}

/// A density matrix: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        ensure_square(&matrix)?;
        let residual = hermiticity_residual(&matrix);
        if residual > tol.herm {
            return Err(QmError::NotHermitian { residual });
        }
        let matrix = hermitize(&matrix);
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > tol.trace {
            return Err(QmError::BadTrace { trace });
        }
        let min_eig = eigvalsh(&matrix)[0];
        if min_eig < -tol.psd {
            return Err(QmError::NotPositive { min_eig });
        }
        Ok(Self { matrix })
    }

    /// Normalizes a nonzero PSD matrix to unit trace, then validates.
    pub fn normalized(matrix: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        let trace = matrix.trace().re;
        if trace <= 0.0 || !trace.is_finite() {
            return Err(QmError::BadTrace { trace });
        }
        Self::new(matrix.unscale(trace), tol)
    }

    /// Maximally mixed state `1/d`.
    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(d, d).unscale(d as f64),
        }
    }

    /// Pure state `|ψ⟩⟨ψ|` of a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &nalgebra::DVector<C64>) -> Self {
        let norm2 = psi.norm_squared();
        Self {
            matrix: (psi * psi.adjoint()).unscale(norm2),
        }
    }

    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigvalsh(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn is_faithful(&self, tol: f64) -> bool {
        self.min_eigenvalue() > tol
    }

    /// Von Neumann entropy `−tr(ρ log ρ)`.
    pub fn entropy(&self) -> f64 {
        von_neumann_entropy(&self.matrix)
    }

    /// `ρ^a` for real `a`; zero eigenvalues stay zero when `a > 0`.
    pub fn power(&self, a: f64) -> Result<ComplexMatrix> {
        if a < 0.0 {
            let min_eig = self.min_eigenvalue();
            if min_eig <= 0.0 {
                return Err(QmError::NotFaithful { min_eig });
            }
        }
        Ok(hermitian_function(&self.matrix, |x| {
            if x <= 0.0 {
                if a == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                x.powf(a)
            }
        }))
    }

    /// `−log ρ`, defined only for faithful states.
    pub fn neg_log(&self) -> Result<ComplexMatrix> {
        let min_eig = self.min_eigenvalue();
        if min_eig <= 0.0 {
            return Err(QmError::NotFaithful { min_eig });
        }
        Ok(hermitian_function(&self.matrix, |x| -x.ln()))
    }
}

/// Von Neumann entropy of a PSD matrix; eigenvalues `≤ 0` contribute nothing.
pub fn von_neumann_entropy(m: &ComplexMatrix) -> f64 {
    eigvalsh(m)
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

/// Outcome of a relative entropy evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelativeEntropy {
    Finite(f64),
    /// The support of the first argument is not contained in that of the second.
    Infinite,
}

impl RelativeEntropy {
    pub fn value(self) -> f64 {
        match self {
            Self::Finite(v) => v,
            Self::Infinite => f64::INFINITY,
        }
    }
}

/// `Ent(μ|ρ) = tr(μ(log μ − log ρ))`.
///
/// Eigenvalues of either argument below `floor` are treated as zero. If
/// `μ` has weight above `support_tol` outside the range of `ρ`, the result
/// is [`RelativeEntropy::Infinite`].
pub fn relative_entropy(
    mu: &ComplexMatrix,
    rho: &ComplexMatrix,
    floor: f64,
    support_tol: f64,
) -> RelativeEntropy {
    let mu_vals = eigvalsh(mu);
    let (rho_vals, rho_vecs) = eigh(rho);

    // Weight of μ on the kernel of ρ.
    let mut leak = 0.0;
    for (k, &r) in rho_vals.iter().enumerate() {
        if r <= floor {
            let v = rho_vecs.column(k);
            leak += (v.adjoint() * mu * v)[(0, 0)].re;
        }
    }
    if leak > support_tol {
        return RelativeEntropy::Infinite;
    }

    let mut mu_log_mu = 0.0;
    for &p in &mu_vals {
        if p > floor {
            mu_log_mu += p * p.ln();
        }
    }
    // tr(μ log ρ) = Σ_k log r_k ⟨r_k|μ|r_k⟩ over the support of ρ.
    let mut mu_log_rho = 0.0;
    for (k, &r) in rho_vals.iter().enumerate() {
        if r > floor {
            let v = rho_vecs.column(k);
            let w = (v.adjoint() * mu * v)[(0, 0)].re;
            mu_log_rho += w * r.ln();
        }
    }
    RelativeEntropy::Finite(mu_log_mu - mu_log_rho)
}

/// A unitary matrix `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryPropagator {
    matrix: ComplexMatrix,
}

impl UnitaryPropagator {
    pub fn new(matrix: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        let d = ensure_square(&matrix)?;
        let residual = max_abs_diff(
            &(&matrix * matrix.adjoint()),
            &ComplexMatrix::identity(d, d),
        );
        if residual > tol.unit {
            return Err(QmError::NotUnitary { residual });
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

/// Gibbs state together with its free energy.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalState {
    pub state: DensityMatrix,
    /// `−β⁻¹ log tr e^{−βH}`; `None` at infinite temperature (`β = 0`).
    pub free_energy: Option<f64>,
    pub beta: f64,
}

/// `e^{−βH}/tr(e^{−βH})`, computed through the spectrum with a ground-energy shift.
pub fn thermal_state(h: &Observable, beta: f64) -> Result<ThermalState> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(QmError::InvalidBeta(beta));
    }
    let (vals, vecs) = eigh(h.matrix());
    let e0 = vals[0];
    let weights: Vec<f64> = vals.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z_shifted: f64 = weights.iter().sum();
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let w = C64::new(weights[j] / z_shifted, 0.0);
        for i in 0..n {
            scaled[(i, j)] *= w;
        }
    }
    let rho = hermitize(&(scaled * vecs.adjoint()));
    let rho = rho.unscale(rho.trace().re);
    let free_energy = if beta > 0.0 {
        // log Z = −β e0 + log Σ e^{−β(e−e0)}
        Some(e0 - z_shifted.ln() / beta)
    } else {
        None
    };
    Ok(ThermalState {
        state: DensityMatrix::from_trusted(rho),
        free_energy,
        beta,
    })
}

/// `e^{−iτH}` via the Hermitian eigendecomposition of `H`.
pub fn propagator(h_total: &Observable, tau: f64) -> UnitaryPropagator {
    UnitaryPropagator {
        matrix: hermitian_function_complex(h_total.matrix(), |e| C64::from_polar(1.0, -tau * e)),
    }
}

/// Validating variant of [`propagator`] for raw matrices.
pub fn propagator_checked(
    h_total: &ComplexMatrix,
    tau: f64,
    tol: &Tolerances,
) -> Result<UnitaryPropagator> {
    let h = Observable::new(h_total.clone(), tol)?;
    let u = propagator(&h, tau);
    UnitaryPropagator::new(u.matrix, tol)
}
