//! Random inputs shared by the unit tests.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c64, real_diag, svd, CMatrix};

pub fn random_cmatrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Hermitian positive definite with eigenvalues bounded away from zero.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    let g = random_cmatrix(rng, n, n);
    g.adjoint() * &g + CMatrix::identity(n, n).scale(0.1)
}

/// Square matrix with singular values log-uniform in `[1/sqrt(cond), sqrt(cond)]`.
pub fn random_conditioned<R: Rng>(rng: &mut R, n: usize, cond: f64) -> CMatrix {
    let a = svd(&random_cmatrix(rng, n, n)).unwrap();
    let b = svd(&random_cmatrix(rng, n, n)).unwrap();
    let half = cond.ln() / 2.0;
    let s: Vec<f64> = (0..n)
        .map(|_| rng.random_range(-half..=half).exp())
        .collect();
    &a.u * real_diag(&s) * b.v.adjoint()
}
