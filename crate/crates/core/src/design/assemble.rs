//! Whitening, the two covariance cases, and assembly of the precoders,
//! feedback matrix and receiver from a water-filling solution.

use crate::error::{Error, Result};
use crate::linalg::{c64, evd_hermitian, gmd, identity, real_diag, svd, CMatrix, SvdFactors};
use crate::multibranch::OrderingPattern;

use super::waterfill::{self, settled, starting_points, WaterfillState};
use super::{BranchContext, BranchDesign, DesignCase};

/// A Hermitian positive definite covariance `K = V diag(levels) V^H`.
#[derive(Debug, Clone)]
pub struct Whitening {
    pub vectors: CMatrix,
    pub levels: Vec<f64>,
}

impl Whitening {
    /// `scale * sigma + noise * I`. Exactly diagonal inputs keep the
    /// identity as eigenvectors, so the perfect-CSI case whitens by a pure
    /// scaling.
    pub fn of_covariance(sigma: &CMatrix, scale: f64, noise: f64) -> Result<Self> {
        let n = sigma.nrows();
        let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || sigma[(i, j)] == c64(0.0, 0.0)));
        let (vectors, values) = if diagonal {
            (identity(n), (0..n).map(|i| sigma[(i, i)].re).collect())
        } else {
            let e = evd_hermitian(sigma)?;
            (e.vectors, e.values)
        };
        let levels: Vec<f64> = values.iter().map(|&l| scale * l.max(0.0) + noise).collect();
        if levels.iter().any(|&l| l.is_nan() || l <= 0.0) {
            return Err(Error::Singular(
                "whitening covariance is not positive definite".into(),
            ));
        }
        Ok(Self { vectors, levels })
    }

    pub fn scaled_identity(n: usize, level: f64) -> Self {
        Self {
            vectors: identity(n),
            levels: vec![level; n],
        }
    }

    /// `diag(levels)^{-1/2} V^H`
    pub fn inv_sqrt_left(&self) -> CMatrix {
        let d: Vec<f64> = self.levels.iter().map(|l| l.powf(-0.5)).collect();
        real_diag(&d) * self.vectors.adjoint()
    }
}

/// Whitened channels and their SVDs.
#[derive(Debug, Clone)]
pub struct Whitened {
    pub sr: Whitening,
    pub rd: Whitening,
    /// SVD of `K_sr^{-1/2} Hbar_sr`
    pub svd_sr: SvdFactors,
    /// SVD of `K_rd^{-1/2} T Hbar_rd`
    pub svd_rd: SvdFactors,
}

/// Identity-transmit-correlation whitening. With `Psi = I` the error terms
/// carry the full budgets, `sigma_s2 alpha1 = P_s` and `alpha2 = P_r`, so
/// `K_sr = P_s Sigma_sr + sigma_nsr2 I` and `K_rd = P_r T Sigma_rd T^T + sigma_nrd2 I`.
pub fn whiten_case_a(ctx: &BranchContext) -> Result<Whitened> {
    let b = ctx.budget;
    let sr = Whitening::of_covariance(&ctx.sigma_sr, b.p_s, b.sigma_nsr2)?;
    let rd = Whitening::of_covariance(&ctx.sigma_rd, b.p_r, b.sigma_nrd2)?;
    let svd_sr = svd(&(sr.inv_sqrt_left() * &ctx.hbar_sr))?;
    let svd_rd = svd(&(rd.inv_sqrt_left() * &ctx.hbar_rd))?;
    Ok(Whitened {
        sr,
        rd,
        svd_sr,
        svd_rd,
    })
}

fn leading(values: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| values.get(i).copied().unwrap_or(0.0))
        .collect()
}

pub fn design_case_a(ctx: &BranchContext, pattern: &OrderingPattern) -> Result<BranchDesign> {
    let n = ctx.hbar_rd.nrows();
    let wh = whiten_case_a(ctx)?;
    let lam1 = leading(&wh.svd_sr.sigma, n);
    let lam2 = leading(&wh.svd_rd.sigma, n);
    let state = waterfill::waterfill(&lam1, &lam2, ctx.budget.p_s, ctx.budget.p_r, None);
    assemble(
        ctx,
        pattern,
        DesignCase::A,
        &wh.svd_sr,
        &wh.svd_rd,
        &wh.sr,
        state,
    )
}

/// Diagonal of `V^H Psi^T V` over the first `n` columns of `v`.
fn congruence_diag(v: &CMatrix, psi: &CMatrix, n: usize) -> Vec<f64> {
    let vn = v.columns(0, n);
    let m = vn.adjoint() * psi.transpose() * vn;
    (0..n).map(|i| m[(i, i)].re).collect()
}

/// Identity-receive-covariance design; `e_sr`, `e_rd` are the scalars with
/// `Sigma_sr = e_sr I` and `Sigma_rd = e_rd I`.
pub fn design_case_b(
    ctx: &BranchContext,
    pattern: &OrderingPattern,
    e_sr: f64,
    e_rd: f64,
) -> Result<BranchDesign> {
    let n = ctx.hbar_rd.nrows();
    let b = ctx.budget;
    let svd_sr = svd(&ctx.hbar_sr)?;
    let svd_rd = svd(&ctx.hbar_rd)?;
    let d_sr = congruence_diag(&svd_sr.v, &ctx.psi_sr, n);
    let d_rd = congruence_diag(&svd_rd.v, &ctx.psi_rd, n);
    let a0: Vec<f64> = leading(&svd_sr.sigma, n).iter().map(|l| l * l).collect();
    let b0: Vec<f64> = leading(&svd_rd.sigma, n).iter().map(|l| l * l).collect();

    let betas = |x: &[f64], y: &[f64]| -> (f64, f64) {
        let dot = |p: &[f64], d: &[f64]| p.iter().zip(d).map(|(p, d)| p * d).sum::<f64>();
        (
            e_sr * dot(x, &d_sr) + b.sigma_nsr2,
            e_rd * dot(y, &d_rd) + b.sigma_nrd2,
        )
    };
    let gains = |beta1: f64, beta2: f64| -> (Vec<f64>, Vec<f64>) {
        (
            a0.iter().map(|a| a / beta1).collect(),
            b0.iter().map(|b| b / beta2).collect(),
        )
    };

    // Same restarts as the identity-transmit case; the run with the largest
    // final objective wins.
    let run = |mut x: Vec<f64>| {
        let mut y = vec![0.0; n];
        let (beta1, beta2) = betas(&x, &y);
        let (a, bb) = gains(beta1, beta2);
        let mut trace = vec![waterfill::objective(&a, &bb, &x, &y)];
        let (mut mu_s, mut mu_r) = (0.0, 0.0);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < waterfill::MAX_ITERATIONS {
            let prev = *trace.last().unwrap();
            let (beta1, beta2) = betas(&x, &y);
            let (a, bb) = gains(beta1, beta2);
            let (f, ms, mr) = waterfill::sweep(&a, &bb, b.p_s, b.p_r, &mut x, &mut y);
            mu_s = ms;
            mu_r = mr;
            trace.push(f);
            iterations += 1;
            if iterations > 1 && settled(&a, &bb, &x, &y, f, prev) {
                converged = true;
                break;
            }
        }
        (x, y, mu_s, mu_r, trace, iterations, converged)
    };
    let (x, y, mu_s, mu_r, trace, iterations, converged) = starting_points(&a0, &b0, b.p_s)
        .into_iter()
        .map(run)
        .reduce(|best, r| if r.4.last() > best.4.last() { r } else { best })
        .expect("at least one starting point");

    // Assemble with noise levels consistent with the final powers so the
    // power and equal-diagonal identities hold exactly.
    let (beta1, beta2) = betas(&x, &y);
    let scaled = |f: &SvdFactors, beta: f64| SvdFactors {
        u: f.u.clone(),
        sigma: f.sigma.iter().map(|s| s / beta.sqrt()).collect(),
        v: f.v.clone(),
    };
    let wsr = scaled(&svd_sr, beta1);
    let wrd = scaled(&svd_rd, beta2);
    let state = WaterfillState {
        x,
        y,
        mu_s,
        mu_r,
        lam1: leading(&wsr.sigma, n),
        lam2: leading(&wrd.sigma, n),
        beta1,
        beta2,
        trace,
        iterations,
        converged,
    };
    let whitening = Whitening::scaled_identity(ctx.hbar_sr.nrows(), beta1);
    assemble(ctx, pattern, DesignCase::B, &wsr, &wrd, &whitening, state)
}

/// Builds `F_s`, `F_r`, `U`, `Phi_s` and `W` from whitened SVDs and stream powers.
fn assemble(
    ctx: &BranchContext,
    pattern: &OrderingPattern,
    case: DesignCase,
    svd_sr: &SvdFactors,
    svd_rd: &SvdFactors,
    whitening_sr: &Whitening,
    state: WaterfillState,
) -> Result<BranchDesign> {
    let n = ctx.hbar_rd.nrows();
    let s2 = ctx.sigma_s2;
    let a: Vec<f64> = state.lam1.iter().map(|l| l * l).collect();
    let b: Vec<f64> = state.lam2.iter().map(|l| l * l).collect();
    let (x, y) = (&state.x, &state.y);

    let lam_s: Vec<f64> = x.iter().map(|x| (x / s2).sqrt()).collect();
    let lam_r: Vec<f64> = (0..n)
        .map(|i| (y[i] / (a[i] * x[i] + 1.0)).sqrt())
        .collect();
    let sigma_diag: Vec<f64> = (0..n)
        .map(|i| {
            let (ax, by) = (a[i] * x[i], b[i] * y[i]);
            (1.0 + ax) * (1.0 + by) / ((1.0 + ax + by) * s2)
        })
        .collect();

    let core = real_diag(&sigma_diag.iter().map(|s| s.powf(-0.5)).collect::<Vec<_>>());
    let g = gmd(&core)?;
    let sigma_bar = g.diagonal();
    let r_inv =
        g.r.solve_upper_triangular(&identity(n))
            .ok_or_else(|| Error::Singular("GMD triangular factor is singular".into()))?;
    let mut u = r_inv.adjoint() * c64(sigma_bar, 0.0);
    for i in 0..n {
        u[(i, i)] = c64(1.0, 0.0);
        for j in i + 1..n {
            u[(i, j)] = c64(0.0, 0.0);
        }
    }
    let phi_s = g.p;

    let f_s = svd_sr.v.columns(0, n) * real_diag(&lam_s) * &phi_s;
    let f_r_tilde = svd_rd.v.columns(0, n) * real_diag(&lam_r) * svd_sr.u.columns(0, n).adjoint();
    let f_r = f_r_tilde * whitening_sr.inv_sqrt_left();
    let w = ctx.mmse_receiver(&f_s, &f_r, &u)?;

    Ok(BranchDesign {
        branch: pattern.index,
        pattern: pattern.clone(),
        case,
        f_s,
        f_r,
        u,
        phi_s,
        w,
        sigma_bar2: sigma_bar * sigma_bar,
        sigma_diag,
        state,
    })
}
