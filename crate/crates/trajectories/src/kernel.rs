//! Flat real-coordinate step operators for the inner sampling loops.

use mris_probes::MrisModel;
use nalgebra::DMatrix;

use crate::error::Result;

/// Row-major copy of a square real matrix.
#[derive(Debug, Clone)]
pub(crate) struct Op {
    m: usize,
    data: Vec<f64>,
}

impl Op {
    pub(crate) fn new(t: &DMatrix<f64>) -> Self {
        let m = t.nrows();
        let mut data = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                data.push(t[(i, j)]);
            }
        }
        Self { m, data }
    }

    pub(crate) fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.m..(i + 1) * self.m];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct OutcomeOp {
    pub(crate) increment: f64,
    pub(crate) op: Op,
    /// Row `u^T T_ξ` of the trace functional, so that `p(ξ) = trace_row · x`.
    pub(crate) trace_row: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    pub(crate) d: usize,
    pub(crate) channels: Vec<Op>,
    pub(crate) outcomes: Vec<Vec<OutcomeOp>>,
    pub(crate) rows: Vec<Vec<f64>>,
}

impl Kernel {
    /// Channels only; sufficient for state trajectories.
    pub(crate) fn channels(model: &MrisModel) -> Self {
        let n = model.omega_count();
        Self {
            d: model.dim(),
            channels: model
                .probes()
                .iter()
                .map(|p| Op::new(p.channel.real_matrix()))
                .collect(),
            outcomes: vec![Vec::new(); n],
            rows: (0..n)
                .map(|r| model.chain().p().row(r).iter().copied().collect())
                .collect(),
        }
    }

    /// Channels and measurement outcomes.
    pub(crate) fn full(model: &MrisModel) -> Result<Self> {
        let mut k = Self::channels(model);
        let d = k.d;
        for omega in 0..model.omega_count() {
            let unr = model.unraveling(omega)?;
            k.outcomes[omega] = unr
                .outcomes
                .iter()
                .map(|o| {
                    let t = o.map.real_matrix();
                    let trace_row = (0..d * d)
                        .map(|j| (0..d).map(|i| t[(i, j)]).sum())
                        .collect();
                    OutcomeOp {
                        increment: o.increment,
                        op: Op::new(t),
                        trace_row,
                    }
                })
                .collect();
        }
        Ok(k)
    }

    pub(crate) fn m(&self) -> usize {
        self.d * self.d
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
