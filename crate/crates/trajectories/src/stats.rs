//! Aggregation helpers and empirical statistics of entropy records.

use nalgebra::DMatrix;

use crate::sampler::EntropyRecord;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Mean and standard error of independent samples, componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicEstimate {
    pub mean: Vec<f64>,
    /// Sample standard deviation divided by `√n_samples`.
    pub stderr: Vec<f64>,
    pub n_samples: usize,
}

impl ErgodicEstimate {
    /// Summarizes rows of samples (one row per independent sample).
    pub fn from_samples(samples: &[Vec<f64>]) -> Self {
        let n = samples.len();
        let k = samples.first().map_or(0, Vec::len);
        let mut mean = Vec::with_capacity(k);
        let mut stderr = Vec::with_capacity(k);
        for c in 0..k {
            let m = samples
                .iter()
                .map(|s| s[c])
                .collect::<CompensatedSum>()
                .value()
                / n as f64;
            let var = if n > 1 {
                samples
                    .iter()
                    .map(|s| (s[c] - m).powi(2))
                    .collect::<CompensatedSum>()
                    .value()
                    / (n - 1) as f64
            } else {
                0.0
            };
            mean.push(m);
            stderr.push((var / n as f64).sqrt());
        }
        Self {
            mean,
            stderr,
            n_samples: n,
        }
    }

    /// Whether `|mean − target| ≤ k·stderr` in every component (with an
    /// absolute floor for degenerate zero-variance estimates).
    pub fn within(&self, target: &[f64], k: f64, floor: f64) -> bool {
        self.mean
            .iter()
            .zip(&self.stderr)
            .zip(target)
            .all(|((m, s), t)| (m - t).abs() <= k * s + floor)
    }
}

/// `(1/N) log mean_traj e^{−α·S_N𝔍}`, evaluated with a max shift.
pub fn empirical_cumulant(records: &[EntropyRecord], alpha: &[f64]) -> f64 {
    assert!(!records.is_empty(), "empirical cumulant needs records");
    let n = records[0].increments_len() as f64;
    let exps: Vec<f64> = records
        .iter()
        .map(|r| -r.s_n_j.iter().zip(alpha).map(|(s, a)| s * a).sum::<f64>())
        .collect();
    let shift = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = exps
        .iter()
        .map(|e| (e - shift).exp())
        .collect::<CompensatedSum>()
        .value()
        / records.len() as f64;
    (shift + mean.ln()) / n
}

/// Per-step rate `S_N𝔍/N` of every record, summarized.
pub fn rate_estimate(records: &[EntropyRecord]) -> ErgodicEstimate {
    let rows: Vec<Vec<f64>> = records
        .iter()
        .map(|r| {
            let n = r.increments_len() as f64;
            r.s_n_j.iter().map(|s| s / n).collect()
        })
        .collect();
    ErgodicEstimate::from_samples(&rows)
}

/// Sample covariance of `S_N𝔍/√N` across records.
pub fn empirical_covariance(records: &[EntropyRecord]) -> DMatrix<f64> {
    let k = records[0].s_n_j.len();
    let n = records[0].increments_len() as f64;
    let m = records.len() as f64;
    let scaled: Vec<Vec<f64>> = records
        .iter()
        .map(|r| r.s_n_j.iter().map(|s| s / n.sqrt()).collect())
        .collect();
    let mean: Vec<f64> = (0..k)
        .map(|c| {
            scaled
                .iter()
                .map(|s| s[c])
                .collect::<CompensatedSum>()
                .value()
                / m
        })
        .collect();
    DMatrix::from_fn(k, k, |a, b| {
        scaled
            .iter()
            .map(|s| (s[a] - mean[a]) * (s[b] - mean[b]))
            .collect::<CompensatedSum>()
            .value()
            / (m - 1.0)
    })
}
