//! Geometric mean decomposition `A = Q R P^H`.
//!
//! Built from the SVD with one pair of real Givens rotations per column:
//! at step `k` the leading diagonal
//! entry of the still-diagonal trailing block is paired with an entry on the
//! other side of the geometric mean, and the 2x2 block is rotated so that its
//! first diagonal entry becomes exactly the geometric mean.

use num_complex::Complex64;

use super::{svd, CMatrix};
use crate::error::{Error, Result};

/// Rank threshold, relative to the largest singular value.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GmdFactors {
    pub q: CMatrix,
    /// Upper triangular with every diagonal entry equal to the geometric mean
    /// of the input's singular values.
    pub r: CMatrix,
    pub p: CMatrix,
}

impl GmdFactors {
    pub fn reconstruct(&self) -> CMatrix {
        &self.q * &self.r * self.p.adjoint()
    }

    /// The common diagonal value of `r`.
    pub fn diagonal(&self) -> f64 {
        self.r[(0, 0)].re
    }
}

pub fn gmd(a: &CMatrix) -> Result<GmdFactors> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(Error::contract(format!(
            "gmd needs a square matrix, got {rows}x{cols}"
        )));
    }
    let n = rows;
    let f = svd(a)?;
    let largest = f.sigma[0];
    let smallest = f.sigma[n - 1];
    if largest <= 0.0 || smallest <= RANK_TOL * largest {
        return Err(Error::Singular(format!(
            "gmd: singular values span [{smallest:.3e}, {largest:.3e}]"
        )));
    }
    let mean = (f.sigma.iter().map(|s| s.ln()).sum::<f64>() / n as f64).exp();

    let mut q = f.u;
    let mut p = f.v;
    let mut r = super::real_diag(&f.sigma);

    for k in 0..n.saturating_sub(1) {
        let d1 = r[(k, k)].re;
        if (d1 - mean).abs() <= 1e-15 * mean {
            continue;
        }
        // Partner on the opposite side of the mean; it exists because the
        // trailing diagonal entries multiply to mean^(n-k).
        let partner = (k + 1..n)
            .find(|&j| {
                let dj = r[(j, j)].re;
                if d1 > mean {
                    dj <= mean
                } else {
                    dj >= mean
                }
            })
            .unwrap_or(k + 1);
        if partner != k + 1 {
            r.swap_rows(k + 1, partner);
            r.swap_columns(k + 1, partner);
            q.swap_columns(k + 1, partner);
            p.swap_columns(k + 1, partner);
        }
        let d2 = r[(k + 1, k + 1)].re;
        let denom = d1 * d1 - d2 * d2;
        let c2 = if denom == 0.0 {
            1.0
        } else {
            ((mean * mean - d2 * d2) / denom).clamp(0.0, 1.0)
        };
        let c = c2.sqrt();
        let s = (1.0 - c2).sqrt();

        // right rotation G2 = [[c, -s], [s, c]]
        // left rotation  G1 = [[c d1, -s d2], [s d2, c d1]] / mean
        let g2 = [[c, -s], [s, c]];
        let g1 = [
            [c * d1 / mean, -s * d2 / mean],
            [s * d2 / mean, c * d1 / mean],
        ];
        rotate_columns(&mut r, k, &g2);
        rotate_rows_transposed(&mut r, k, &g1);
        rotate_columns(&mut q, k, &g1);
        rotate_columns(&mut p, k, &g2);

        r[(k + 1, k)] = Complex64::new(0.0, 0.0);
    }

    Ok(GmdFactors { q, r, p })
}

/// `m[:, k..k+2] <- m[:, k..k+2] * g`
fn rotate_columns(m: &mut CMatrix, k: usize, g: &[[f64; 2]; 2]) {
    for i in 0..m.nrows() {
        let a = m[(i, k)];
        let b = m[(i, k + 1)];
        m[(i, k)] = a * g[0][0] + b * g[1][0];
        m[(i, k + 1)] = a * g[0][1] + b * g[1][1];
    }
}

/// `m[k..k+2, :] <- g^T * m[k..k+2, :]`
fn rotate_rows_transposed(m: &mut CMatrix, k: usize, g: &[[f64; 2]; 2]) {
    for j in 0..m.ncols() {
        let a = m[(k, j)];
        let b = m[(k + 1, j)];
        m[(k, j)] = a * g[0][0] + b * g[1][0];
        m[(k + 1, j)] = a * g[0][1] + b * g[1][1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, is_unitary, real_diag};
    use crate::testutil::random_conditioned;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check(a: &CMatrix, f: &GmdFactors) {
        let n = a.nrows();
        assert!(is_unitary(&f.q, 1e-10));
        assert!(is_unitary(&f.p, 1e-10));
        for i in 0..n {
            for j in 0..i {
                assert!(f.r[(i, j)].norm() < 1e-12 * a.norm());
            }
        }
        let d = f.diagonal();
        for i in 0..n {
            assert!((f.r[(i, i)].re - d).abs() <= 1e-10 * d);
            assert!(f.r[(i, i)].im.abs() <= 1e-12 * d);
        }
        assert!((f.reconstruct() - a).norm() <= 1e-9 * a.norm());
    }

    #[test]
    fn identity_is_fixed() {
        let f = gmd(&identity(3)).unwrap();
        assert!((&f.q - identity(3)).norm() < 1e-14);
        assert!((&f.r - identity(3)).norm() < 1e-14);
        assert!((&f.p - identity(3)).norm() < 1e-14);
    }

    #[test]
    fn diagonal_two_by_two_has_unit_diagonal() {
        let a = real_diag(&[2.0, 0.5]);
        let f = gmd(&a).unwrap();
        check(&a, &f);
        assert!((f.r[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!((f.r[(1, 1)].re - 1.0).abs() < 1e-14);
        // off-diagonal from the 2x2 closed form: c s (d2^2 - d1^2) / mean, c^2 = 1/5
        let (c, s) = ((0.2f64).sqrt(), (0.8f64).sqrt());
        assert!((f.r[(0, 1)].re - c * s * (0.25 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn random_well_conditioned() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 1..=6 {
            for _ in 0..20 {
                let a = random_conditioned(&mut rng, n, 100.0);
                let f = gmd(&a).unwrap();
                check(&a, &f);
                let sv = svd(&a).unwrap().sigma;
                let gm = sv.iter().product::<f64>().powf(1.0 / n as f64);
                assert!((f.diagonal() - gm).abs() <= 1e-10 * gm);
            }
        }
    }

    #[test]
    fn rejects_rank_deficient() {
        let a = real_diag(&[1.0, 0.0, 2.0]);
        assert!(matches!(gmd(&a), Err(Error::Singular(_))));
        assert!(gmd(&CMatrix::zeros(2, 3)).is_err());
    }
}
