//! Random matrices for tests and randomized model generation.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::matrix::{hermitize, ComplexMatrix, C64};

/// Complex Ginibre matrix with standard normal real and imaginary parts.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    DMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    hermitize(&random_matrix(rng, d))
}

/// Real symmetric matrix with standard normal entries.
pub fn random_real_symmetric<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    let a = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let s = (&a + a.transpose()) * 0.5;
    s.map(|x| C64::new(x, 0.0))
}

/// `G G^†` for a Ginibre `G`; almost surely positive definite.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    let g = random_matrix(rng, d);
    &g * g.adjoint()
}

/// Random full-rank density matrix (Hilbert–Schmidt measure).
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    let p = random_psd(rng, d);
    let t = p.trace().re;
    p.unscale(t)
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    let qr = random_matrix(rng, d).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let z = r[(j, j)];
        let phase = if z.norm() > 0.0 {
            z / z.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random probability vector (normalized exponentials).
pub fn random_probability<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n)
        .map(|_| -rng.random::<f64>().max(1e-300).ln())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}
