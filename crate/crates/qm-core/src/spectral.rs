//! Spectral projections with clustering of nearly degenerate eigenvalues.

use nalgebra::DVector;

use crate::matrix::{eigh, ComplexMatrix, C64};

/// `H = Σ_s s Π_s` with eigenvalues closer than `degeneracy_tol` merged.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Cluster values (mean of the merged eigenvalues), ascending.
    pub eigenvalues: Vec<f64>,
    /// One orthogonal projection per cluster.
    pub projections: Vec<ComplexMatrix>,
    pub degeneracy_tol: f64,
    /// Unclustered eigenvalues, ascending.
    pub raw_values: Vec<f64>,
    /// Eigenvectors matching `raw_values`, as columns.
    pub raw_vectors: ComplexMatrix,
    /// Cluster index of each raw eigenvalue.
    pub cluster_of: Vec<usize>,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn raw_vector(&self, k: usize) -> DVector<C64> {
        self.raw_vectors.column(k).into_owned()
    }

    /// Raw eigen-indices belonging to cluster `s`.
    pub fn members(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.cluster_of
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == s)
            .map(|(k, _)| k)
    }
}

/// Clusters the spectrum of a Hermitian matrix by single linkage: consecutive
/// sorted eigenvalues closer than `degeneracy_tol` share a projection.
pub fn spectral_projections(h: &ComplexMatrix, degeneracy_tol: f64) -> SpectralDecomposition {
    let (vals, vecs) = eigh(h);
    let n = vals.len();
    let mut cluster_of = vec![0usize; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for k in 0..n {
        if k == 0 || vals[k] - vals[k - 1] > degeneracy_tol {
            groups.push(Vec::new());
        }
        let g = groups.len() - 1;
        groups[g].push(k);
        cluster_of[k] = g;
    }
    let mut eigenvalues = Vec::with_capacity(groups.len());
    let mut projections = Vec::with_capacity(groups.len());
    for g in &groups {
        eigenvalues.push(g.iter().map(|&k| vals[k]).sum::<f64>() / g.len() as f64);
        let mut p = ComplexMatrix::zeros(n, n);
        for &k in g {
            let v = vecs.column(k);
            p += v * v.adjoint();
        }
        projections.push(p);
    }
    SpectralDecomposition {
        eigenvalues,
        projections,
        degeneracy_tol,
        raw_values: vals,
        raw_vectors: vecs,
        cluster_of,
    }
}
