//! Two-time measurement of the probe entropy observable.

use nalgebra::DMatrix;
use qm_core::{env_kraus_family, ComplexMatrix, DensityMatrix, QuantumChannel, C64};

use crate::error::{ProbeError, Result};

/// One measurement outcome `ξ = (s, s')` of a probe.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// Cluster index of the first measurement.
    pub s: usize,
    /// Cluster index of the second measurement.
    pub s_prime: usize,
    /// `δξ = ς_{s'} − ς_s`.
    pub increment: f64,
    /// `ρ ↦ e^{−ς_s} tr_E((𝟙⊗Π_{s'}) U (ρ⊗Π_s) U^†)`, completely positive.
    pub map: QuantumChannel,
}

/// Per-probe unraveling of the reduced channel into measurement outcomes.
#[derive(Debug, Clone)]
pub struct Unraveling {
    /// `S_E = −log ρ_E`.
    pub entropy_observable: ComplexMatrix,
    /// Clustered eigenvalues `ς` of `S_E`, ascending.
    pub values: Vec<f64>,
    /// Spectral projections `Π_s` matching `values`.
    pub projections: Vec<ComplexMatrix>,
    /// Outcomes in lexicographic `(s, s')` order.
    pub outcomes: Vec<Outcome>,
}

impl Unraveling {
    /// Builds the outcome maps from the same eigen-resolved Kraus operators as
    /// the reduced channel, so that the outcome maps sum to it term by term.
    pub fn new(
        u: &ComplexMatrix,
        rho_env: &DensityMatrix,
        ds: usize,
        degeneracy_tol: f64,
        omega: usize,
    ) -> Result<Self> {
        let family = env_kraus_family(u, rho_env.matrix(), ds)?;
        let de = rho_env.dim();
        if family.env_weights.iter().any(|&p| p <= 0.0) {
            return Err(ProbeError::SingularEnvironment { omega });
        }
        // Eigenvalues of S_E in ascending order correspond to descending weights.
        let order: Vec<usize> = (0..de).rev().collect();
        let s_raw: Vec<f64> = order.iter().map(|&k| -family.env_weights[k].ln()).collect();
        let mut cluster_of = vec![0usize; de];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (pos, &k) in order.iter().enumerate() {
            if pos == 0 || s_raw[pos] - s_raw[pos - 1] > degeneracy_tol {
                groups.push(Vec::new());
            }
            groups.last_mut().expect("pushed").push(k);
            cluster_of[k] = groups.len() - 1;
        }
        let values: Vec<f64> = groups
            .iter()
            .map(|g| g.iter().map(|&k| -family.env_weights[k].ln()).sum::<f64>() / g.len() as f64)
            .collect();
        let projections: Vec<ComplexMatrix> = groups
            .iter()
            .map(|g| {
                let mut p = DMatrix::zeros(de, de);
                for &k in g {
                    let v = family.env_vectors.column(k);
                    p += v * v.adjoint();
                }
                p
            })
            .collect();
        let mut entropy_observable = DMatrix::<C64>::zeros(de, de);
        for k in 0..de {
            let v = family.env_vectors.column(k);
            entropy_observable += (v * v.adjoint()).scale(-family.env_weights[k].ln());
        }

        let mut outcomes = Vec::with_capacity(groups.len() * groups.len());
        for s in 0..groups.len() {
            for s_prime in 0..groups.len() {
                let kraus: Vec<ComplexMatrix> = family
                    .terms
                    .iter()
                    .filter(|t| cluster_of[t.input] == s && cluster_of[t.output] == s_prime)
                    .map(|t| t.op.scale(family.env_weights[t.input].sqrt()))
                    .collect();
                outcomes.push(Outcome {
                    s,
                    s_prime,
                    increment: values[s_prime] - values[s],
                    map: QuantumChannel::cp_from_kraus(kraus)?,
                });
            }
        }
        Ok(Self {
            entropy_observable,
            values,
            projections,
            outcomes,
        })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// `p(ξ) = tr(L_ξ ρ)` for every outcome.
    pub fn probabilities(&self, rho: &ComplexMatrix) -> Vec<f64> {
        self.outcomes
            .iter()
            .map(|o| o.map.apply(rho).trace().re)
            .collect()
    }

    /// `Σ_ξ e^{−α δξ} L_ξ` as a single map (Kraus families rescaled by `e^{−α δξ/2}`).
    pub fn tilted_channel(&self, alpha: f64) -> QuantumChannel {
        let kraus = self
            .outcomes
            .iter()
            .flat_map(|o| {
                let w = (-alpha * o.increment / 2.0).exp();
                o.map.kraus().iter().map(move |k| k.scale(w))
            })
            .collect();
        QuantumChannel::cp_from_kraus(kraus).expect("nonempty family")
    }
}
