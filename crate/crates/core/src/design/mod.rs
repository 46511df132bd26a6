//! Per-branch robust transceiver synthesis.
//!
//! A branch is fixed by an ordering `T`; the destination sees the reordered
//! channel `T Hbar_rd` and the reordered error covariance `T Sigma_rd T^T`.
//! Two covariance structures are supported:
//!
//! * [`DesignCase::A`]: identity transmit correlation (`Psi = I`), arbitrary
//!   receive covariance.
//! * [`DesignCase::B`]: receive covariance proportional to the identity,
//!   arbitrary transmit correlation.
//!
//! Both reduce to whitened channels, the alternating water-filling in
//! [`waterfill`], and a GMD of the resulting diagonal MSE core.

mod assemble;
pub mod waterfill;

pub use assemble::{design_case_a, design_case_b, whiten_case_a, Whitened, Whitening};
pub use waterfill::{kkt_residual, objective, starting_points, waterfill, WaterfillState};

use nalgebra::Cholesky;

use crate::channel::ChannelStatistics;
use crate::error::{Error, Result};
use crate::linalg::{c64, identity, inverse, CMatrix};
use crate::multibranch::OrderingPattern;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBudget {
    pub p_s: f64,
    pub p_r: f64,
    pub sigma_nsr2: f64,
    pub sigma_nrd2: f64,
}

impl PowerBudget {
    pub fn new(p_s: f64, p_r: f64, sigma_nsr2: f64, sigma_nrd2: f64) -> Result<Self> {
        for (name, v) in [
            ("p_s", p_s),
            ("p_r", p_r),
            ("sigma_nsr2", sigma_nsr2),
            ("sigma_nrd2", sigma_nrd2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::contract(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            p_s,
            p_r,
            sigma_nsr2,
            sigma_nrd2,
        })
    }

    /// Budgets from per-hop SNRs in dB with the given noise power on both hops.
    pub fn from_snr_db(snr_sr_db: f64, snr_rd_db: f64, noise: f64) -> Result<Self> {
        Self::new(
            noise * 10f64.powf(snr_sr_db / 10.0),
            noise * 10f64.powf(snr_rd_db / 10.0),
            noise,
            noise,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DesignCase {
    A,
    B,
}

impl std::fmt::Display for DesignCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DesignCase::A => "A",
            DesignCase::B => "B",
        })
    }
}

impl std::str::FromStr for DesignCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(DesignCase::A),
            "B" | "b" => Ok(DesignCase::B),
            other => Err(Error::Config(format!("unknown design case '{other}'"))),
        }
    }
}

const STRUCTURE_TOL: f64 = 1e-12;

fn is_scaled_identity(m: &CMatrix) -> bool {
    let s = m[(0, 0)];
    (m - identity(m.nrows()) * s).norm() <= STRUCTURE_TOL * m.norm().max(1.0)
}

/// Rejects statistics that fall outside the structure the chosen case solves.
pub fn check_case(stats: &ChannelStatistics, case: DesignCase) -> Result<()> {
    match case {
        DesignCase::A => {
            let ok = |m: &CMatrix| (m - identity(m.nrows())).norm() <= STRUCTURE_TOL;
            if !(ok(&stats.psi_sr) && ok(&stats.psi_rd)) {
                return Err(Error::Unsupported(
                    "case A needs identity transmit correlation on both hops".into(),
                ));
            }
        }
        DesignCase::B => {
            if !(is_scaled_identity(&stats.sigma_sr) && is_scaled_identity(&stats.sigma_rd)) {
                return Err(Error::Unsupported(
                    "case B needs receive error covariances proportional to the identity".into(),
                ));
            }
        }
    }
    Ok(())
}

/// The case whose structure the statistics fit, preferring A.
pub fn applicable_case(stats: &ChannelStatistics) -> Result<DesignCase> {
    if check_case(stats, DesignCase::A).is_ok() {
        Ok(DesignCase::A)
    } else if check_case(stats, DesignCase::B).is_ok() {
        Ok(DesignCase::B)
    } else {
        Err(Error::Unsupported(
            "neither transmit correlation nor receive covariance is an identity".into(),
        ))
    }
}

/// Everything one branch's design and analysis need: estimated channels with
/// the destination ordering applied, the matching error statistics, the
/// power budget and the symbol energy.
#[derive(Debug, Clone)]
pub struct BranchContext {
    pub hbar_sr: CMatrix,
    /// `T Hbar_rd`
    pub hbar_rd: CMatrix,
    pub psi_sr: CMatrix,
    pub sigma_sr: CMatrix,
    pub psi_rd: CMatrix,
    /// `T Sigma_rd T^T`
    pub sigma_rd: CMatrix,
    pub budget: PowerBudget,
    pub sigma_s2: f64,
}

impl BranchContext {
    pub fn new(
        stats: &ChannelStatistics,
        hbar_sr: &CMatrix,
        hbar_rd: &CMatrix,
        pattern: &OrderingPattern,
        budget: PowerBudget,
        sigma_s2: f64,
    ) -> Result<Self> {
        let d = stats.dims;
        if hbar_sr.shape() != (d.n_r, d.n_s) || hbar_rd.shape() != (d.n_d, d.n_r) {
            return Err(Error::contract(format!(
                "channel shapes {:?}, {:?} do not match dims {d:?}",
                hbar_sr.shape(),
                hbar_rd.shape()
            )));
        }
        if pattern.perm.len() != d.n_d {
            return Err(Error::contract(format!(
                "ordering of size {} for {} streams",
                pattern.perm.len(),
                d.n_d
            )));
        }
        Ok(Self {
            hbar_sr: hbar_sr.clone(),
            hbar_rd: pattern.apply_rows(hbar_rd),
            psi_sr: stats.psi_sr.clone(),
            sigma_sr: stats.sigma_sr.clone(),
            psi_rd: stats.psi_rd.clone(),
            sigma_rd: pattern
                .apply_rows(&pattern.apply_rows(&stats.sigma_rd).transpose())
                .transpose(),
            budget,
            sigma_s2,
        })
    }

    /// Relay-side noise plus error covariance `sigma_s2 alpha1 Sigma_sr + sigma_nsr2 I`,
    /// with `alpha1 = tr(F_s F_s^H Psi_sr^T)`.
    pub fn relay_disturbance(&self, f_s: &CMatrix) -> CMatrix {
        let alpha1 = (f_s * f_s.adjoint() * self.psi_sr.transpose()).trace().re;
        let n = self.sigma_sr.nrows();
        &self.sigma_sr * c64(self.sigma_s2 * alpha1, 0.0)
            + identity(n) * c64(self.budget.sigma_nsr2, 0.0)
    }

    /// Expected covariance of the relay's received signal.
    pub fn relay_covariance(&self, f_s: &CMatrix) -> CMatrix {
        let hf = &self.hbar_sr * f_s;
        &hf * hf.adjoint() * c64(self.sigma_s2, 0.0) + self.relay_disturbance(f_s)
    }

    /// Expected relay transmit power `tr(F_r R_r F_r^H)`.
    pub fn relay_expected_power(&self, f_s: &CMatrix, f_r: &CMatrix) -> f64 {
        (f_r * self.relay_covariance(f_s) * f_r.adjoint())
            .trace()
            .re
    }

    pub fn source_power(&self, f_s: &CMatrix) -> f64 {
        self.sigma_s2 * f_s.norm_squared()
    }

    /// `G = T Hbar_rd F_r Hbar_sr F_s`
    pub fn effective_channel(&self, f_s: &CMatrix, f_r: &CMatrix) -> CMatrix {
        &self.hbar_rd * f_r * &self.hbar_sr * f_s
    }

    /// Destination disturbance covariance `B = A - sigma_s2 G G^H`, built
    /// directly rather than by subtraction.
    pub fn disturbance(&self, f_s: &CMatrix, f_r: &CMatrix) -> CMatrix {
        let r = self.relay_covariance(f_s);
        let alpha2 = (f_r * &r * f_r.adjoint() * self.psi_rd.transpose())
            .trace()
            .re;
        let hf = &self.hbar_rd * f_r;
        let n = self.hbar_rd.nrows();
        &hf * self.relay_disturbance(f_s) * hf.adjoint()
            + &self.sigma_rd * c64(alpha2, 0.0)
            + identity(n) * c64(self.budget.sigma_nrd2, 0.0)
    }

    /// Expected covariance `A` of the destination's received signal.
    pub fn received_covariance(&self, f_s: &CMatrix, f_r: &CMatrix) -> CMatrix {
        let g = self.effective_channel(f_s, f_r);
        self.disturbance(f_s, f_r) + &g * g.adjoint() * c64(self.sigma_s2, 0.0)
    }

    /// `W = sigma_s2 U G^H A^{-1}`.
    pub fn mmse_receiver(&self, f_s: &CMatrix, f_r: &CMatrix, u: &CMatrix) -> Result<CMatrix> {
        let a = self.received_covariance(f_s, f_r);
        let g = self.effective_channel(f_s, f_r);
        let rhs = &g * u.adjoint() * c64(self.sigma_s2, 0.0);
        let chol = Cholesky::new(a).ok_or_else(|| {
            Error::Singular("received covariance is not positive definite".into())
        })?;
        Ok(chol.solve(&rhs).adjoint())
    }

    /// Expected squared error `E||W y_d - v||^2` for an arbitrary receiver,
    /// written as `sigma_s2 ||W G - U||_F^2 + tr(W B W^H)`.
    pub fn mse_expectation(&self, f_s: &CMatrix, f_r: &CMatrix, u: &CMatrix, w: &CMatrix) -> f64 {
        let g = self.effective_channel(f_s, f_r);
        let b = self.disturbance(f_s, f_r);
        self.sigma_s2 * (w * &g - u).norm_squared() + (w * b * w.adjoint()).trace().re
    }

    /// MSE matrix of the MMSE receiver, `U (sigma_s^-2 I + G^H B^{-1} G)^{-1} U^H`.
    pub fn mse_matrix(&self, f_s: &CMatrix, f_r: &CMatrix, u: &CMatrix) -> Result<CMatrix> {
        let g = self.effective_channel(f_s, f_r);
        let b = self.disturbance(f_s, f_r);
        let chol = Cholesky::new(b).ok_or_else(|| {
            Error::Singular("disturbance covariance is not positive definite".into())
        })?;
        let n = g.ncols();
        let core = identity(n) * c64(1.0 / self.sigma_s2, 0.0) + g.adjoint() * chol.solve(&g);
        let core = (&core + core.adjoint()) * c64(0.5, 0.0);
        Ok(u * inverse(&core)? * u.adjoint())
    }
}

#[derive(Debug, Clone)]
pub struct BranchDesign {
    pub branch: usize,
    pub pattern: OrderingPattern,
    pub case: DesignCase,
    pub f_s: CMatrix,
    pub f_r: CMatrix,
    /// Unit lower-triangular feedback matrix.
    pub u: CMatrix,
    pub phi_s: CMatrix,
    pub w: CMatrix,
    /// Common diagonal value of the MSE matrix.
    pub sigma_bar2: f64,
    /// Diagonal of the scalarized MSE core before the GMD.
    pub sigma_diag: Vec<f64>,
    pub state: WaterfillState,
}

impl BranchDesign {
    pub fn converged(&self) -> bool {
        self.state.converged
    }
}

/// Designs one branch for the case the caller selects.
pub fn design_branch(
    stats: &ChannelStatistics,
    hbar_sr: &CMatrix,
    hbar_rd: &CMatrix,
    pattern: &OrderingPattern,
    budget: PowerBudget,
    sigma_s2: f64,
    case: DesignCase,
) -> Result<BranchDesign> {
    check_case(stats, case)?;
    let ctx = BranchContext::new(stats, hbar_sr, hbar_rd, pattern, budget, sigma_s2)?;
    match case {
        DesignCase::A => design_case_a(&ctx, pattern),
        DesignCase::B => design_case_b(
            &ctx,
            pattern,
            stats.sigma_sr[(0, 0)].re,
            stats.sigma_rd[(0, 0)].re,
        ),
    }
}

/// MSE of a design under the statistics in `ctx` using the design's own receiver.
pub fn evaluate_mse(design: &BranchDesign, ctx: &BranchContext) -> f64 {
    ctx.mse_expectation(&design.f_s, &design.f_r, &design.u, &design.w)
}

/// `tr(E)` with the MMSE receiver for `ctx`.
pub fn evaluate_mse_inverted(design: &BranchDesign, ctx: &BranchContext) -> Result<f64> {
    Ok(ctx
        .mse_matrix(&design.f_s, &design.f_r, &design.u)?
        .trace()
        .re)
}
