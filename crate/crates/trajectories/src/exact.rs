//! Exact distribution of measured words by exhaustive enumeration.

use std::collections::HashMap;

use mris_extended::ExtendedState;
use mris_probes::MrisModel;

use crate::error::{Result, TrajectoryError};
use crate::kernel::{dot, Kernel};
use crate::stats::CompensatedSum;

/// Largest number of words an enumeration may visit.
pub const ENUMERATION_LIMIT: f64 = 1e7;

/// One measured word `(ω_1, ξ_1, …, ω_n, ξ_n)` and its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactEntry {
    pub omegas: Vec<usize>,
    pub xis: Vec<usize>,
    pub prob: f64,
    /// Summed increments per probe label.
    pub s_n_j: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExactDistribution {
    pub n_steps: usize,
    pub entries: Vec<ExactEntry>,
}

impl ExactDistribution {
    pub fn total(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.prob)
            .collect::<CompensatedSum>()
            .value()
    }

    /// `E[e^{−α·S_n𝔍}]`.
    pub fn mgf(&self, alpha: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|e| e.prob * (-e.s_n_j.iter().zip(alpha).map(|(s, a)| s * a).sum::<f64>()).exp())
            .collect::<CompensatedSum>()
            .value()
    }

    /// `(1/n) log E[e^{−α·S_n𝔍}]`.
    pub fn cumulant(&self, alpha: &[f64]) -> f64 {
        self.mgf(alpha).ln() / self.n_steps as f64
    }

    /// Mean of `S_n𝔍` per label.
    pub fn mean(&self) -> Vec<f64> {
        let k = self.entries.first().map_or(0, |e| e.s_n_j.len());
        (0..k)
            .map(|c| {
                self.entries
                    .iter()
                    .map(|e| e.prob * e.s_n_j[c])
                    .collect::<CompensatedSum>()
                    .value()
            })
            .collect()
    }

    /// Probability of every label word, marginalized over outcomes.
    pub fn path_marginal(&self) -> HashMap<Vec<usize>, f64> {
        let mut out: HashMap<Vec<usize>, f64> = HashMap::new();
        for e in &self.entries {
            *out.entry(e.omegas.clone()).or_default() += e.prob;
        }
        out
    }
}

/// All measured words of length `n` started from the model's initial state.
pub fn enumerate_full_statistics(model: &MrisModel, n: usize) -> Result<ExactDistribution> {
    enumerate_from(model, &model.initial_state(), n)
}

/// All measured words of length `n` started from the extended state `r0`,
/// whose block `ω` is the weighted state about to meet probe `ω`.
pub fn enumerate_from(
    model: &MrisModel,
    r0: &ExtendedState,
    n: usize,
) -> Result<ExactDistribution> {
    if n == 0 {
        return Err(TrajectoryError::Config(
            "enumeration needs at least one step",
        ));
    }
    let kernel = Kernel::full(model)?;
    let labels = model.omega_count();
    let max_out = kernel.outcomes.iter().map(Vec::len).max().unwrap_or(1) as f64;
    let size = (labels as f64 * max_out).powi(n as i32);
    if size > ENUMERATION_LIMIT {
        return Err(TrajectoryError::TooLarge {
            size,
            limit: ENUMERATION_LIMIT,
        });
    }
    let m = kernel.m();
    let x0 = r0.to_coords();
    let mut walk = Walk {
        kernel: &kernel,
        n,
        entries: Vec::new(),
        omegas: Vec::with_capacity(n),
        xis: Vec::with_capacity(n),
        s_n_j: vec![0.0; labels],
    };
    for w in 0..labels {
        let x = &x0[w * m..(w + 1) * m];
        if x.iter().any(|&v| v != 0.0) {
            walk.visit(w, x);
        }
    }
    Ok(ExactDistribution {
        n_steps: n,
        entries: walk.entries,
    })
}

struct Walk<'a> {
    kernel: &'a Kernel,
    n: usize,
    entries: Vec<ExactEntry>,
    omegas: Vec<usize>,
    xis: Vec<usize>,
    s_n_j: Vec<f64>,
}

impl Walk<'_> {
    /// Interacts the unnormalized state `x` with probe `w` and recurses.
    fn visit(&mut self, w: usize, x: &[f64]) {
        let kernel = self.kernel;
        let mut y = vec![0.0; kernel.m()];
        for (xi, o) in kernel.outcomes[w].iter().enumerate() {
            if dot(&o.trace_row, x) <= 0.0 {
                continue;
            }
            o.op.apply(x, &mut y);
            self.omegas.push(w);
            self.xis.push(xi);
            self.s_n_j[w] += o.increment;
            if self.omegas.len() == self.n {
                let prob = y[..kernel.d].iter().sum();
                self.entries.push(ExactEntry {
                    omegas: self.omegas.clone(),
                    xis: self.xis.clone(),
                    prob,
                    s_n_j: self.s_n_j.clone(),
                });
            } else {
                for (next, &p) in kernel.rows[w].iter().enumerate() {
                    if p > 0.0 {
                        let z: Vec<f64> = y.iter().map(|v| v * p).collect();
                        self.visit(next, &z);
                    }
                }
            }
            self.s_n_j[w] -= o.increment;
            self.omegas.pop();
            self.xis.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mris_extended::evolve;
    use mris_probes::fixtures;

    #[test]
    fn probabilities_sum_to_one() {
        let m = fixtures::two_temperature();
        for n in 1..=4 {
            let d = enumerate_full_statistics(&m, n).unwrap();
            assert!((d.total() - 1.0).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn moment_generating_function_matches_deformed_generator() {
        let m = fixtures::two_temperature();
        let alpha = [0.4, -0.7];
        let n = 4;
        let d = enumerate_full_statistics(&m, n).unwrap();
        let g = m.deformed_generator(&alpha).unwrap();
        let want = evolve(&g, &m.initial_state(), n).total_trace();
        assert!((d.mgf(&alpha) - want).abs() < 1e-12 * want.max(1.0));
    }

    #[test]
    fn label_marginal_is_the_chain_path_measure() {
        let m = fixtures::two_temperature();
        let d = enumerate_full_statistics(&m, 3).unwrap();
        let r0 = m.initial_state();
        let p = m.chain().p();
        for (word, prob) in d.path_marginal() {
            let mut want = r0.block(word[0]).trace().re;
            for k in 1..word.len() {
                want *= p[(word[k - 1], word[k])];
            }
            assert!((prob - want).abs() < 1e-13);
        }
    }

    #[test]
    fn oversized_enumeration_is_refused() {
        let m = fixtures::two_temperature();
        assert!(matches!(
            enumerate_full_statistics(&m, 30),
            Err(TrajectoryError::TooLarge { .. })
        ));
    }
}
