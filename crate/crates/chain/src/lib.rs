//! Finite-state homogeneous Markov chains.
//!
//! A chain is a pair `(π, P)` over an ordered label set, with `P` right
//! stochastic: `P[(ν, ω)]` is the probability of moving from `ν` to `ω`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Entries of `P` at or below this value are not edges of the transition graph.
pub const EDGE_THRESHOLD: f64 = 1e-14;
/// Normalization tolerance for `π` and the rows of `P`.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Tolerance for the detailed-balance verdict.
pub const DETAILED_BALANCE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("chain needs at least one state")]
    Empty,
    #[error("{what} has length {found}, expected {expected}")]
    Length {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("pi[{index}] = {value} is negative or not finite")]
    BadPiEntry { index: usize, value: f64 },
    #[error("pi sums to {sum}, expected 1")]
    PiSum { sum: f64 },
    #[error("P[{row}][{col}] = {value} is negative or not finite")]
    BadEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} of P sums to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
}

/// A validated Markov chain `(labels, π, P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    labels: Vec<String>,
    pi: Vec<f64>,
    p: DMatrix<f64>,
}

impl MarkovChain {
    pub fn new(labels: Vec<String>, pi: Vec<f64>, p: DMatrix<f64>) -> Result<Self, ChainError> {
        let n = labels.len();
        if n == 0 {
            return Err(ChainError::Empty);
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(ChainError::DuplicateLabel(l.clone()));
            }
        }
        if pi.len() != n {
            return Err(ChainError::Length {
                what: "pi",
                expected: n,
                found: pi.len(),
            });
        }
        if p.nrows() != n || p.ncols() != n {
            return Err(ChainError::Length {
                what: "P",
                expected: n,
                found: p.nrows().max(p.ncols()),
            });
        }
        validate_probability(&pi)?;
        validate_stochastic(&p)?;
        Ok(Self { labels, pi, p })
    }

    /// Chain with labels `"0", "1", ...`.
    pub fn with_default_labels(pi: Vec<f64>, p: DMatrix<f64>) -> Result<Self, ChainError> {
        let labels = (0..pi.len()).map(|k| k.to_string()).collect();
        Self::new(labels, pi, p)
    }

    /// Builds `P` from row-major nested slices.
    pub fn from_rows(labels: &[&str], pi: &[f64], rows: &[&[f64]]) -> Result<Self, ChainError> {
        let n = rows.len();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(ChainError::Length {
                    what: if r == 0 { "P row 0" } else { "P row" },
                    expected: n,
                    found: row.len(),
                });
            }
        }
        let p = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(
            labels.iter().map(|s| s.to_string()).collect(),
            pi.to_vec(),
            p,
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Same transition matrix with another initial law.
    pub fn with_pi(&self, pi: Vec<f64>) -> Result<Self, ChainError> {
        Self::new(self.labels.clone(), pi, self.p.clone())
    }

    /// Same initial law with another transition matrix.
    pub fn with_p(&self, p: DMatrix<f64>) -> Result<Self, ChainError> {
        Self::new(self.labels.clone(), self.pi.clone(), p)
    }

    /// Law of `ω_n`, namely `π P^n`.
    pub fn marginal(&self, n: usize) -> Vec<f64> {
        let mut v = DVector::from_column_slice(&self.pi).transpose();
        for _ in 0..n {
            v *= &self.p;
        }
        v.iter().copied().collect()
    }

    /// All entries of `P` exceed the edge threshold.
    pub fn is_positivity_improving(&self) -> bool {
        self.p.iter().all(|&x| x > EDGE_THRESHOLD)
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.p[(from, to)] > EDGE_THRESHOLD
    }
}

fn validate_probability(pi: &[f64]) -> Result<(), ChainError> {
    for (index, &value) in pi.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(ChainError::BadPiEntry { index, value });
        }
    }
    let sum: f64 = pi.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(ChainError::PiSum { sum });
    }
    Ok(())
}

fn validate_stochastic(p: &DMatrix<f64>) -> Result<(), ChainError> {
    for row in 0..p.nrows() {
        let mut sum = 0.0;
        for col in 0..p.ncols() {
            let value = p[(row, col)];
            if !value.is_finite() || value < 0.0 {
                return Err(ChainError::BadEntry { row, col, value });
            }
            sum += value;
        }
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(ChainError::RowSum { row, sum });
        }
    }
    Ok(())
}

/// Irreducibility, period, stationary law and detailed balance of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainClassification {
    pub irreducible: bool,
    /// Period of the chain; `0` when the chain is reducible.
    pub period: usize,
    pub primitive: bool,
    /// Left eigenvector of `P` for eigenvalue 1, normalized to a probability.
    pub stationary: Vec<f64>,
    /// `false` when the chain is reducible and the stationary law may not be unique.
    pub stationary_unique: bool,
    pub detailed_balance: bool,
    /// `max_{ω,ν} |π_+ω P_ων − π_+ν P_νω|`.
    pub db_residual: f64,
}

fn reachable(p: &DMatrix<f64>, start: usize, forward: bool) -> Vec<bool> {
    let n = p.nrows();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            let w = if forward { p[(u, v)] } else { p[(v, u)] };
            if w > EDGE_THRESHOLD && !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of a strongly connected transition graph: the gcd of
/// `level(u) + 1 − level(v)` over all edges `u → v`, with BFS levels from state 0.
fn period_of_irreducible(p: &DMatrix<f64>) -> usize {
    let n = p.nrows();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if p[(u, v)] > EDGE_THRESHOLD && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0;
    for u in 0..n {
        for v in 0..n {
            if p[(u, v)] > EDGE_THRESHOLD {
                let diff = (level[u] as i64 + 1 - level[v] as i64).unsigned_abs() as usize;
                g = gcd(g, diff);
            }
        }
    }
    g
}

/// Solves `π (P − 1) = 0`, `Σ π = 1` in the least-squares sense.
fn stationary_vector(p: &DMatrix<f64>) -> Vec<f64> {
    let n = p.nrows();
    let mut a = DMatrix::<f64>::zeros(n + 1, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = p[(j, i)] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n + 1);
    b[n] = 1.0;
    let svd = a.svd(true, true);
    let x = svd
        .solve(&b, 1e-13)
        .unwrap_or_else(|_| DVector::from_element(n, 1.0 / n as f64));
    let clipped: Vec<f64> = x
        .iter()
        .map(|&v| if v < 0.0 && v > -1e-12 { 0.0 } else { v })
        .collect();
    let s: f64 = clipped.iter().sum();
    clipped.into_iter().map(|v| v / s).collect()
}

pub fn classify_chain(c: &MarkovChain) -> ChainClassification {
    let p = c.p();
    let n = c.len();
    let fwd = reachable(p, 0, true);
    let bwd = reachable(p, 0, false);
    let irreducible = fwd.iter().all(|&b| b) && bwd.iter().all(|&b| b);
    let period = if irreducible {
        period_of_irreducible(p)
    } else {
        0
    };
    let stationary = stationary_vector(p);
    let mut db_residual = 0.0_f64;
    for w in 0..n {
        for v in 0..n {
            db_residual =
                db_residual.max((stationary[w] * p[(w, v)] - stationary[v] * p[(v, w)]).abs());
        }
    }
    ChainClassification {
        irreducible,
        period,
        primitive: irreducible && period == 1,
        stationary,
        stationary_unique: irreducible,
        detailed_balance: db_residual <= DETAILED_BALANCE_TOL,
        db_residual,
    }
}

/// Inverse-CDF draw from a probability vector in index order.
///
/// Returns the first index whose cumulative weight exceeds `u`; round-off
/// at the top end falls back to the last index with positive weight.
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len().saturating_sub(1))
}

/// Deterministic generator used for every seeded draw in the workspace.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Samples `ω_0 … ω_n` (as label indices) with `ω_0 ~ π` and `ω_{k+1} ~ P(ω_k, ·)`.
pub fn sample_path(c: &MarkovChain, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = seeded_rng(seed);
    sample_path_with(c, n, &mut rng)
}

pub fn sample_path_with<R: Rng + ?Sized>(c: &MarkovChain, n: usize, rng: &mut R) -> Vec<usize> {
    let mut path = Vec::with_capacity(n + 1);
    let mut w = sample_index(c.pi(), rng.random::<f64>());
    path.push(w);
    let rows: Vec<Vec<f64>> = (0..c.len())
        .map(|r| c.p().row(r).iter().copied().collect())
        .collect();
    for _ in 0..n {
        w = sample_index(&rows[w], rng.random::<f64>());
        path.push(w);
    }
    path
}
