//! Dense complex matrix kernels used by the transceiver design.
//!
//! Everything here works on `nalgebra::DMatrix<Complex64>`. The SVD is a
//! one-sided Jacobi iteration and the Hermitian eigendecomposition is
//! delegated to nalgebra. Both are put into a canonical form: values sorted
//! descending (stable in the original index) and every vector phase-rotated
//! so that its largest-magnitude entry is real and positive. With that convention two runs on the same input produce the
//! same factors bit for bit, which the paired-seed simulations depend on.

mod gmd;

pub use gmd::{gmd, GmdFactors};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Positive-definiteness threshold, relative to the largest eigenvalue.
pub const EPS_PD: f64 = 1e-12;

const HERMITIAN_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 10_000;
const JACOBI_SWEEPS: usize = 100;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Thin SVD `a = u * diag(sigma) * v^H` with `k = min(rows, cols)` columns in
/// `u` and `v`. For square input both factors are unitary.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> CMatrix {
        &self.u * real_diag(&self.sigma) * self.v.adjoint()
    }
}

/// Eigendecomposition `a = vectors * diag(values) * vectors^H` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub vectors: CMatrix,
    pub values: Vec<f64>,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> CMatrix {
        &self.vectors * real_diag(&self.values) * self.vectors.adjoint()
    }
}

pub fn svd(a: &CMatrix) -> Result<SvdFactors> {
    check_finite(a, "svd")?;
    let (rows, cols) = a.shape();
    let failure = Error::NumericalFailure {
        op: "svd",
        rows,
        cols,
    };
    let (u, s, v) = if rows >= cols {
        one_sided_jacobi(a).ok_or(failure)?
    } else {
        let (u, s, v) = one_sided_jacobi(&a.adjoint()).ok_or(failure)?;
        (v, s, u)
    };
    let order = descending_order(&s);

    let k = order.len();
    let mut su = CMatrix::zeros(rows, k);
    let mut sv = CMatrix::zeros(cols, k);
    let mut sigma = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        sigma.push(s[src]);
        let phase = unit_phase_of_peak(u.column(src).iter());
        su.set_column(dst, &(u.column(src) * phase.conj()));
        sv.set_column(dst, &(v.column(src) * phase.conj()));
    }
    complete_orthonormal(&mut su);
    complete_orthonormal(&mut sv);
    Ok(SvdFactors {
        u: su,
        sigma,
        v: sv,
    })
}

/// Hestenes one-sided Jacobi SVD of a matrix with `rows >= cols`: plane
/// rotations applied from the right until all columns are mutually
/// orthogonal. Returns `(u, sigma, v)` unsorted; columns of `u` belonging to
/// a zero singular value are left zero. `None` if the sweeps run out.
fn one_sided_jacobi(a: &CMatrix) -> Option<(CMatrix, Vec<f64>, CMatrix)> {
    let (rows, n) = a.shape();
    let mut w = a.clone();
    let mut v = identity(n);
    let tol = f64::EPSILON * rows as f64;
    let mut converged = false;
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dotc(&w.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Rephasing column q makes the cross product real; the rest
                // is the real symmetric Jacobi rotation with the smaller angle.
                let phase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s, phase);
                rotate_columns(&mut v, p, q, c, s, phase);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }
    let sigma: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    for (j, &s) in sigma.iter().enumerate() {
        if s > 0.0 {
            w.column_mut(j).unscale_mut(s);
        }
    }
    Some((w, sigma, v))
}

fn rotate_columns(m: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    for i in 0..m.nrows() {
        let xp = m[(i, p)];
        let xq = m[(i, q)] * phase;
        m[(i, p)] = xp * c - xq * s;
        m[(i, q)] = xp * s + xq * c;
    }
}

/// Replaces zero columns with unit vectors orthogonal to all other columns.
fn complete_orthonormal(m: &mut CMatrix) {
    let (rows, cols) = m.shape();
    let zero: Vec<usize> = (0..cols).filter(|&j| m.column(j).norm() == 0.0).collect();
    let mut candidate = 0;
    for j in zero {
        while candidate < rows {
            let mut e = CVector::zeros(rows);
            e[candidate] = c64(1.0, 0.0);
            candidate += 1;
            for k in 0..cols {
                let col = m.column(k).clone_owned();
                let proj = col.dotc(&e);
                e -= col * proj;
            }
            let norm = e.norm();
            if norm > 0.5 {
                m.set_column(j, &e.unscale(norm));
                break;
            }
        }
    }
}

pub fn evd_hermitian(a: &CMatrix) -> Result<HermitianEigen> {
    check_finite(a, "evd")?;
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(Error::contract(format!(
            "evd_hermitian needs a square matrix, got {rows}x{cols}"
        )));
    }
    let asym = (a - a.adjoint()).norm();
    let scale = a.norm();
    if asym > HERMITIAN_TOL * scale {
        return Err(Error::contract(format!(
            "evd_hermitian input is not Hermitian (|A - A^H| = {asym:.3e}, |A| = {scale:.3e})"
        )));
    }
    let sym = (a + a.adjoint()).scale(0.5);
    let raw =
        SymmetricEigen::try_new(sym, f64::EPSILON, MAX_SWEEPS).ok_or(Error::NumericalFailure {
            op: "evd_hermitian",
            rows,
            cols,
        })?;
    let order = descending_order(raw.eigenvalues.as_slice());
    let mut vectors = CMatrix::zeros(rows, rows);
    let mut values = Vec::with_capacity(rows);
    for (dst, &src) in order.iter().enumerate() {
        values.push(raw.eigenvalues[src]);
        let col = raw.eigenvectors.column(src);
        let phase = unit_phase_of_peak(col.iter());
        vectors.set_column(dst, &(col * phase.conj()));
    }
    Ok(HermitianEigen { vectors, values })
}

/// `A^{-1/2}` for Hermitian positive definite `a`, so that `B a B^H = I`.
pub fn inv_sqrt_psd(a: &CMatrix) -> Result<CMatrix> {
    let eig = evd_hermitian(a)?;
    let largest = eig.values.first().copied().unwrap_or(0.0);
    let smallest = eig.values.last().copied().unwrap_or(0.0);
    if largest <= 0.0 || smallest <= EPS_PD * largest {
        return Err(Error::Singular(format!(
            "inv_sqrt_psd: eigenvalue range [{smallest:.3e}, {largest:.3e}] is not positive definite"
        )));
    }
    let d: Vec<f64> = eig.values.iter().map(|&l| l.powf(-0.5)).collect();
    Ok(&eig.vectors * real_diag(&d) * eig.vectors.adjoint())
}

/// Hermitian square root of a PSD matrix; slightly negative eigenvalues from
/// rounding are clamped to zero so a zero or rank-deficient input is fine.
pub fn sqrt_psd(a: &CMatrix) -> Result<CMatrix> {
    let eig = evd_hermitian(a)?;
    let d: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    Ok(&eig.vectors * real_diag(&d) * eig.vectors.adjoint())
}

/// Permutation matrix `T` with `(T s)_i = s_{perm[i]}`.
pub fn permutation_matrix(perm: &[usize]) -> Result<CMatrix> {
    validate_permutation(perm)?;
    let n = perm.len();
    let mut t = CMatrix::zeros(n, n);
    for (row, &col) in perm.iter().enumerate() {
        t[(row, col)] = Complex64::new(1.0, 0.0);
    }
    Ok(t)
}

pub fn validate_permutation(perm: &[usize]) -> Result<()> {
    let n = perm.len();
    if n == 0 {
        return Err(Error::contract("empty permutation"));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n {
            return Err(Error::contract(format!(
                "permutation index {p} out of range 0..{n}"
            )));
        }
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::contract(format!("permutation repeats index {p}")));
        }
    }
    Ok(())
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(Error::contract(format!(
            "cannot invert a {rows}x{cols} matrix"
        )));
    }
    a.clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .ok_or_else(|| Error::Singular(format!("{rows}x{cols} matrix is not invertible")))
}

pub fn real_diag(d: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        d.len(),
        d.iter().map(|&x| Complex64::new(x, 0.0)),
    ))
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-stacked vectorization.
pub fn vec_cols(a: &CMatrix) -> CVector {
    CVector::from_column_slice(a.as_slice())
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.trace()
}

pub fn is_unitary(a: &CMatrix, tol: f64) -> bool {
    let n = a.ncols();
    (a.adjoint() * a - identity(n)).norm() <= tol * (n as f64).sqrt()
}

fn check_finite(a: &CMatrix, op: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::contract(format!("{op}: empty matrix")));
    }
    if a.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::contract(format!("{op}: non-finite entry")));
    }
    Ok(())
}

/// Indices that sort `values` descending; equal values keep their original order.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    order
}

/// Unit-modulus phase of the first entry with the largest magnitude.
fn unit_phase_of_peak<'a>(col: impl Iterator<Item = &'a Complex64>) -> Complex64 {
    let mut best = Complex64::new(0.0, 0.0);
    let mut best_abs = -1.0;
    for z in col {
        let a = z.norm();
        if a > best_abs * (1.0 + 1e-12) {
            best_abs = a;
            best = *z;
        }
    }
    if best_abs > 0.0 {
        best / best_abs
    } else {
        Complex64::new(1.0, 0.0)
    }
}
