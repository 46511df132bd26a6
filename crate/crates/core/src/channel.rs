//! Channel statistics, estimated channels and Kronecker-structured
//! estimation errors for the source-relay and relay-destination hops.
//!
//! Shapes: `H_sr` is `n_r x n_s` with transmit covariance `psi_sr`
//! (`n_s x n_s`) and receive covariance `sigma_sr` (`n_r x n_r`); `H_rd` is
//! `n_d x n_r` with `psi_rd` (`n_r x n_r`) and `sigma_rd` (`n_d x n_d`).
//! Errors are drawn as `dH = Sigma^{1/2} G Psi^{T/2}` with `G` i.i.d. unit
//! complex Gaussian, so `E[dH F dH^H] = tr(F Psi^T) Sigma`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{c64, sqrt_psd, CMatrix};
use crate::rng::complex_normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkDims {
    pub n_s: usize,
    pub n_r: usize,
    pub n_d: usize,
}

impl LinkDims {
    pub fn new(n_s: usize, n_r: usize, n_d: usize) -> Result<Self> {
        if n_s == 0 || n_r == 0 || n_d == 0 {
            return Err(Error::contract("antenna counts must be positive"));
        }
        if n_s < n_d || n_r < n_d {
            return Err(Error::contract(format!(
                "need n_s >= n_d and n_r >= n_d to carry n_d streams (n_s={n_s}, n_r={n_r}, n_d={n_d})"
            )));
        }
        Ok(Self { n_s, n_r, n_d })
    }

    pub fn square(n: usize) -> Self {
        Self {
            n_s: n,
            n_r: n,
            n_d: n,
        }
    }
}

/// `[rho^|i-j|]`, the exponential correlation model.
pub fn exponential_correlation(n: usize, rho: f64) -> Result<CMatrix> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::contract(format!(
            "correlation coefficient must lie in [0, 1), got {rho}"
        )));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        c64(rho.powi(i.abs_diff(j) as i32), 0.0)
    }))
}

#[derive(Debug, Clone)]
pub struct ChannelStatistics {
    pub dims: LinkDims,
    pub psi_sr: CMatrix,
    pub sigma_sr: CMatrix,
    pub psi_rd: CMatrix,
    pub sigma_rd: CMatrix,
    pub sigma_e2: f64,
    /// Transmit-side correlation coefficient (0 when built from matrices).
    pub alpha: f64,
    /// Receive-side correlation coefficient (0 when built from matrices).
    pub beta: f64,
}

impl ChannelStatistics {
    /// Exponential-correlation statistics: `psi = R(alpha)`, `sigma = sigma_e2 R(beta)`.
    pub fn build(dims: LinkDims, alpha: f64, beta: f64, sigma_e2: f64) -> Result<Self> {
        if sigma_e2.is_nan() || sigma_e2 < 0.0 {
            return Err(Error::contract(format!(
                "error variance must be non-negative, got {sigma_e2}"
            )));
        }
        Ok(Self {
            dims,
            psi_sr: exponential_correlation(dims.n_s, alpha)?,
            sigma_sr: exponential_correlation(dims.n_r, beta)?.scale(sigma_e2),
            psi_rd: exponential_correlation(dims.n_r, alpha)?,
            sigma_rd: exponential_correlation(dims.n_d, beta)?.scale(sigma_e2),
            sigma_e2,
            alpha,
            beta,
        })
    }

    /// Arbitrary Hermitian PSD covariances. `sigma_e2` is the scale that
    /// `sigma_*` carries; it sets the estimated-channel variance when sampling.
    pub fn from_matrices(
        psi_sr: CMatrix,
        sigma_sr: CMatrix,
        psi_rd: CMatrix,
        sigma_rd: CMatrix,
        sigma_e2: f64,
    ) -> Result<Self> {
        let dims = LinkDims {
            n_s: psi_sr.nrows(),
            n_r: sigma_sr.nrows(),
            n_d: sigma_rd.nrows(),
        };
        let shapes = [
            (&psi_sr, dims.n_s),
            (&sigma_sr, dims.n_r),
            (&psi_rd, dims.n_r),
            (&sigma_rd, dims.n_d),
        ];
        for (m, n) in shapes {
            if m.shape() != (n, n) {
                return Err(Error::contract(format!(
                    "covariance shape {:?} does not match {n}x{n}",
                    m.shape()
                )));
            }
            if (m - m.adjoint()).norm() > 1e-10 * m.norm() {
                return Err(Error::contract("covariance matrices must be Hermitian"));
            }
        }
        if sigma_e2.is_nan() || sigma_e2 < 0.0 {
            return Err(Error::contract("error variance must be non-negative"));
        }
        Ok(Self {
            dims,
            psi_sr,
            sigma_sr,
            psi_rd,
            sigma_rd,
            sigma_e2,
            alpha: 0.0,
            beta: 0.0,
        })
    }

    /// The same correlation structure with the estimation error removed;
    /// a design on these statistics trusts the estimated channels outright.
    pub fn perfect_csi(&self) -> Self {
        let mut s = self.clone();
        s.sigma_sr.fill(c64(0.0, 0.0));
        s.sigma_rd.fill(c64(0.0, 0.0));
        s.sigma_e2 = 0.0;
        s
    }

    fn receive_correlation(&self, sigma: &CMatrix) -> Result<CMatrix> {
        if self.sigma_e2 > 0.0 {
            Ok(sigma.unscale(self.sigma_e2))
        } else {
            exponential_correlation(sigma.nrows(), self.beta)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub hbar_sr: CMatrix,
    pub hbar_rd: CMatrix,
    pub dh_sr: CMatrix,
    pub dh_rd: CMatrix,
    pub h_sr: CMatrix,
    pub h_rd: CMatrix,
}

/// Square-root factors of one hop, precomputed once per statistics object.
#[derive(Debug, Clone)]
struct HopFactors {
    /// `sqrt(1 - sigma_e2) R_R^{1/2}`
    est_left: CMatrix,
    /// `Sigma^{1/2}`
    err_left: CMatrix,
    /// `Psi^{T/2}`
    right: CMatrix,
    rows: usize,
    cols: usize,
}

impl HopFactors {
    fn new(stats: &ChannelStatistics, psi: &CMatrix, sigma: &CMatrix) -> Result<Self> {
        let scale = (1.0 - stats.sigma_e2).sqrt();
        Ok(Self {
            est_left: sqrt_psd(&stats.receive_correlation(sigma)?)?.scale(scale),
            err_left: sqrt_psd(sigma)?,
            right: sqrt_psd(psi)?.transpose(),
            rows: sigma.nrows(),
            cols: psi.nrows(),
        })
    }

    fn iid<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |_, _| complex_normal(rng))
    }

    fn estimate<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        &self.est_left * self.iid(rng) * &self.right
    }

    fn error<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        &self.err_left * self.iid(rng) * &self.right
    }
}

/// Draws channel realizations for fixed statistics.
///
/// The estimated channel has covariance `(1 - sigma_e2) Psi ⊗ R_R` where
/// `R_R = Sigma / sigma_e2` is the receive correlation, so that the true
/// channel `H = Hbar + dH` has unit per-entry variance when uncorrelated.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    stats: ChannelStatistics,
    sr: HopFactors,
    rd: HopFactors,
}

impl ChannelSampler {
    pub fn new(stats: &ChannelStatistics) -> Result<Self> {
        if stats.sigma_e2.is_nan() || stats.sigma_e2 >= 1.0 {
            return Err(Error::contract(format!(
                "error variance must be below 1 for unit-variance channels, got {}",
                stats.sigma_e2
            )));
        }
        Ok(Self {
            sr: HopFactors::new(stats, &stats.psi_sr, &stats.sigma_sr)?,
            rd: HopFactors::new(stats, &stats.psi_rd, &stats.sigma_rd)?,
            stats: stats.clone(),
        })
    }

    pub fn stats(&self) -> &ChannelStatistics {
        &self.stats
    }

    /// Draw order is fixed: `Hbar_sr`, `Hbar_rd`, `dH_sr`, `dH_rd`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let hbar_sr = self.sr.estimate(rng);
        let hbar_rd = self.rd.estimate(rng);
        let (dh_sr, dh_rd) = self.sample_errors(rng);
        let h_sr = &hbar_sr + &dh_sr;
        let h_rd = &hbar_rd + &dh_rd;
        ChannelRealization {
            hbar_sr,
            hbar_rd,
            dh_sr,
            dh_rd,
            h_sr,
            h_rd,
        }
    }

    /// Fresh estimation errors for both hops. Zero when `sigma_e2 == 0`.
    pub fn sample_errors<R: Rng + ?Sized>(&self, rng: &mut R) -> (CMatrix, CMatrix) {
        if self.stats.sigma_e2 == 0.0 {
            let d = self.stats.dims;
            return (CMatrix::zeros(d.n_r, d.n_s), CMatrix::zeros(d.n_d, d.n_r));
        }
        (self.sr.error(rng), self.rd.error(rng))
    }
}

pub fn sample_realization<R: Rng + ?Sized>(
    stats: &ChannelStatistics,
    rng: &mut R,
) -> Result<ChannelRealization> {
    Ok(ChannelSampler::new(stats)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;
    use crate::rng::{substream, Stream};

    #[test]
    fn exponential_cases() {
        assert_eq!(exponential_correlation(4, 0.0).unwrap(), identity(4));
        let a = 0.3;
        let r = exponential_correlation(4, a).unwrap();
        let row: Vec<f64> = (0..4).map(|j| r[(0, j)].re).collect();
        assert_eq!(row, vec![1.0, a, a * a, a * a * a]);
        let r = exponential_correlation(3, 0.5).unwrap();
        let want = [[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(r[(i, j)], c64(want[i][j], 0.0));
            }
        }
        assert!(exponential_correlation(3, 1.0).is_err());
        assert!(exponential_correlation(3, -0.1).is_err());
    }

    #[test]
    fn statistics_from_coefficients() {
        let s = ChannelStatistics::build(LinkDims::square(4), 0.0, 0.0, 0.001).unwrap();
        assert_eq!(s.psi_sr, identity(4));
        assert_eq!(s.sigma_rd, identity(4).scale(0.001));

        let s = ChannelStatistics::build(LinkDims::square(4), 0.0, 0.0, 0.0).unwrap();
        assert_eq!(s.sigma_sr, CMatrix::zeros(4, 4));

        let s = ChannelStatistics::build(LinkDims::new(4, 3, 2).unwrap(), 0.5, 0.0, 0.01).unwrap();
        assert_eq!(s.psi_sr, exponential_correlation(4, 0.5).unwrap());
        assert_eq!(s.psi_rd, exponential_correlation(3, 0.5).unwrap());
        assert_eq!(s.sigma_sr, identity(3).scale(0.01));
        assert_eq!(s.sigma_rd, identity(2).scale(0.01));
    }

    #[test]
    fn perfect_csi_has_no_error() {
        let s = ChannelStatistics::build(LinkDims::square(3), 0.2, 0.4, 0.0).unwrap();
        let mut rng = substream(1, 0, Stream::Channel);
        let r = sample_realization(&s, &mut rng).unwrap();
        assert_eq!(r.dh_sr, CMatrix::zeros(3, 3));
        assert_eq!(r.h_sr, r.hbar_sr);
        assert_eq!(r.h_rd, r.hbar_rd);
    }

    #[test]
    fn true_channel_is_sum_and_sampling_repeats() {
        let s = ChannelStatistics::build(LinkDims::new(4, 3, 2).unwrap(), 0.3, 0.2, 0.05).unwrap();
        let sampler = ChannelSampler::new(&s).unwrap();
        let r1 = sampler.sample(&mut substream(9, 2, Stream::Channel));
        let r2 = sampler.sample(&mut substream(9, 2, Stream::Channel));
        assert_eq!(r1.h_sr, &r1.hbar_sr + &r1.dh_sr);
        assert_eq!(r1.h_rd, &r1.hbar_rd + &r1.dh_rd);
        assert_eq!(r1.h_sr, r2.h_sr);
        assert_eq!(r1.hbar_rd, r2.hbar_rd);
        assert_eq!(r1.h_sr.shape(), (3, 4));
        assert_eq!(r1.h_rd.shape(), (2, 3));
    }

    #[test]
    fn rejects_error_variance_at_or_above_one() {
        let s = ChannelStatistics::build(LinkDims::square(2), 0.0, 0.0, 1.0).unwrap();
        assert!(ChannelSampler::new(&s).is_err());
        assert!(ChannelStatistics::build(LinkDims::square(2), 0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn true_channel_has_unit_variance() {
        let s = ChannelStatistics::build(LinkDims::square(4), 0.0, 0.0, 0.001).unwrap();
        let sampler = ChannelSampler::new(&s).unwrap();
        let mut rng = substream(2024, 0, Stream::Channel);
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let r = sampler.sample(&mut rng);
            acc += r.h_sr.norm_squared() / 16.0;
        }
        let v = acc / draws as f64;
        assert!((0.98..=1.02).contains(&v), "variance {v}");
    }
}
