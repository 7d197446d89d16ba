//! Dense complex matrix helpers.
//!
//! Vectorization is column-stacking throughout the workspace: the entry
//! `m[(i, j)]` of a `d x d` matrix lands at position `i + j * d` of `vec(m)`.
//! With this convention `vec(A X B) = (B^T ⊗ A) vec(X)`, so the map
//! `X ↦ K X K^†` has matrix `conj(K) ⊗ K`.

use nalgebra::{linalg::Schur, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{QmError, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Builds a complex matrix from row-major `(re, im)` pairs.
pub fn from_rows(rows: &[&[(f64, f64)]]) -> ComplexMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(n, m, |i, j| C64::new(rows[i][j].0, rows[i][j].1))
}

/// Builds a complex matrix from a real row-major table.
pub fn from_real_rows(rows: &[&[f64]]) -> ComplexMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(n, m, |i, j| C64::new(rows[i][j], 0.0))
}

pub fn diag_real(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(values[i], 0.0)
        } else {
            ZERO
        }
    })
}

pub fn identity(d: usize) -> ComplexMatrix {
    DMatrix::identity(d, d)
}

pub fn ensure_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(QmError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Largest entrywise modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermiticity_residual(m: &ComplexMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// `(m + m^†)/2`.
pub fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Kronecker product; `(a ⊗ b)[(i*rb + k, j*cb + l)] = a[(i,j)] * b[(k,l)]`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Partial trace over the second tensor factor of `H_S ⊗ H_E`.
pub fn partial_trace_env(m: &ComplexMatrix, ds: usize, de: usize) -> Result<ComplexMatrix> {
    let n = ds * de;
    if m.nrows() != n || m.ncols() != n {
        return Err(QmError::DimensionMismatch {
            context: "partial_trace_env",
            expected: n,
            found: m.nrows().max(m.ncols()),
        });
    }
    Ok(DMatrix::from_fn(ds, ds, |a, b| {
        (0..de).map(|k| m[(a * de + k, b * de + k)]).sum()
    }))
}

/// Partial trace over the first tensor factor of `H_S ⊗ H_E`.
pub fn partial_trace_sys(m: &ComplexMatrix, ds: usize, de: usize) -> Result<ComplexMatrix> {
    let n = ds * de;
    if m.nrows() != n || m.ncols() != n {
        return Err(QmError::DimensionMismatch {
            context: "partial_trace_sys",
            expected: n,
            found: m.nrows().max(m.ncols()),
        });
    }
    Ok(DMatrix::from_fn(de, de, |k, l| {
        (0..ds).map(|a| m[(a * de + k, a * de + l)]).sum()
    }))
}

/// The operator `⟨chi|_E M |phi⟩_E` on `H_S`, for `M` on `H_S ⊗ H_E`.
pub fn env_matrix_element(
    m: &ComplexMatrix,
    chi: &DVector<C64>,
    phi: &DVector<C64>,
    ds: usize,
    de: usize,
) -> ComplexMatrix {
    DMatrix::from_fn(ds, ds, |a, b| {
        let mut acc = ZERO;
        for k in 0..de {
            let ck = chi[k].conj();
            if ck == ZERO {
                continue;
            }
            for l in 0..de {
                acc += ck * m[(a * de + k, b * de + l)] * phi[l];
            }
        }
        acc
    })
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
///
/// The input is Hermitized first, so tiny anti-Hermitian round-off does not
/// leak into the spectrum. Column `k` of the returned matrix is the
/// eigenvector for `values[k]`.
pub fn eigh(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &ComplexMatrix) -> Vec<f64> {
    eigh(m).0
}

/// Applies a real function to a Hermitian matrix through its spectrum.
pub fn hermitian_function(m: &ComplexMatrix, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let (vals, vecs) = eigh(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let fj = C64::new(f(vals[j]), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * vecs.adjoint()
}

/// Applies a complex-valued function to a Hermitian matrix through its spectrum.
pub fn hermitian_function_complex(m: &ComplexMatrix, f: impl Fn(f64) -> C64) -> ComplexMatrix {
    let (vals, vecs) = eigh(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let fj = f(vals[j]);
        for i in 0..n {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * vecs.adjoint()
}

/// Sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> f64 {
    m.clone().svd(false, false).singular_values.iter().sum()
}

/// Column-stacking vectorization.
pub fn vec_col(m: &ComplexMatrix) -> DVector<C64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_col`].
pub fn unvec_col(v: &DVector<C64>, d: usize) -> ComplexMatrix {
    DMatrix::from_column_slice(d, d, v.as_slice())
}

/// Hilbert–Schmidt pairing `tr(a^† b)`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Orthonormal basis of the real space of `d x d` Hermitian matrices.
///
/// Order: diagonal units `E_ii`, then for each `i < j` the symmetric element
/// `(E_ij + E_ji)/√2` followed by the antisymmetric one `i(E_ji − E_ij)/√2`.
pub fn hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut basis = Vec::with_capacity(d * d);
    for i in 0..d {
        let mut e = DMatrix::zeros(d, d);
        e[(i, i)] = ONE;
        basis.push(e);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut sym = DMatrix::zeros(d, d);
            sym[(i, j)] = C64::new(s, 0.0);
            sym[(j, i)] = C64::new(s, 0.0);
            basis.push(sym);
            let mut anti = DMatrix::zeros(d, d);
            anti[(i, j)] = C64::new(0.0, -s);
            anti[(j, i)] = C64::new(0.0, s);
            basis.push(anti);
        }
    }
    basis
}

/// Real coordinates `x_k = tr(G_k m)` of a Hermitian matrix in [`hermitian_basis`].
///
/// For non-Hermitian input this returns the coordinates of its Hermitian part.
pub fn to_coords(m: &ComplexMatrix) -> Vec<f64> {
    let d = m.nrows();
    let r2 = std::f64::consts::SQRT_2;
    let mut x = Vec::with_capacity(d * d);
    for i in 0..d {
        x.push(m[(i, i)].re);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let a = m[(i, j)];
            let b = m[(j, i)];
            x.push((a.re + b.re) / r2);
            x.push((b.im - a.im) / r2);
        }
    }
    x
}

/// Inverse of [`to_coords`].
pub fn from_coords(x: &[f64], d: usize) -> ComplexMatrix {
    assert_eq!(x.len(), d * d, "coordinate vector has wrong length");
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(x[i], 0.0);
    }
    let mut k = d;
    for i in 0..d {
        for j in (i + 1)..d {
            let re = x[k] * s;
            let im = -x[k + 1] * s;
            m[(i, j)] = C64::new(re, im);
            m[(j, i)] = C64::new(re, -im);
            k += 2;
        }
    }
    m
}

/// Trace functional in coordinates: `tr(m) = Σ_i x_i` over the diagonal slots.
pub fn coords_trace(x: &[f64], d: usize) -> f64 {
    x[..d].iter().sum()
}

/// Real matrix of a Hermiticity-preserving superoperator in [`hermitian_basis`]:
/// `T[k][l] = tr(G_k Φ(G_l))`.
pub fn superop_to_real(superop: &ComplexMatrix, d: usize) -> DMatrix<f64> {
    let n = d * d;
    let basis = hermitian_basis(d);
    let mut t = DMatrix::zeros(n, n);
    for (l, g) in basis.iter().enumerate() {
        let image = unvec_col(&(superop * vec_col(g)), d);
        let x = to_coords(&image);
        for k in 0..n {
            t[(k, l)] = x[k];
        }
    }
    t
}

/// Eigenvalues of a real square matrix.
///
/// The Francis iteration can stall on matrices with exact permutation-like
/// structure, so after a failure the matrix is conjugated by a Householder
/// reflection, which leaves the spectrum unchanged, and the iteration retried.
pub fn real_eigenvalues(a: &DMatrix<f64>) -> Option<Vec<Complex64>> {
    let eigs = |m: DMatrix<f64>| {
        Schur::try_new(m, f64::EPSILON, 100_000)
            .map(|s| s.complex_eigenvalues().iter().copied().collect())
    };
    if let Some(e) = eigs(a.clone()) {
        return Some(e);
    }
    let n = a.nrows();
    (1..=3).find_map(|k| {
        let v = DVector::from_fn(n, |i, _| 1.0 / (1.0 + (k * i) as f64).sqrt()).normalize();
        let h = DMatrix::identity(n, n) - (&v * v.transpose()) * 2.0;
        eigs(&h * a * &h)
    })
}
