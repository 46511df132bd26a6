//! Sample-average MSE of a fixed design over channel errors, data and noise.

use rand::Rng;

use crate::channel::ChannelSampler;
use crate::design::{BranchDesign, PowerBudget};
use crate::error::Result;
use crate::linalg::{CMatrix, CVector};
use crate::rng::complex_normal;
use crate::thp::{thp_encode, QamConstellation};

/// What drives the precoder input `xbar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceModel {
    /// Uniform QAM symbols through the THP encoder.
    Thp,
    /// Circular Gaussian `xbar` with variance `sigma_s2`, the design's own model.
    Gaussian,
}

/// Mean `||W y_d - v||^2` over `samples` draws of the channel errors, the
/// source and the noise, with the estimated channels held fixed.
#[allow(clippy::too_many_arguments)]
pub fn empirical_mse<R: Rng + ?Sized>(
    design: &BranchDesign,
    sampler: &ChannelSampler,
    hbar_sr: &CMatrix,
    hbar_rd: &CMatrix,
    budget: PowerBudget,
    constellation: &QamConstellation,
    samples: usize,
    source: SourceModel,
    rng: &mut R,
) -> Result<f64> {
    let d = sampler.stats().dims;
    let s2 = constellation.sigma_s2();
    let nb = d.n_d * constellation.bits_per_symbol();
    let perm = &design.pattern.perm;
    let mut total = 0.0;
    for _ in 0..samples {
        let (dh_sr, dh_rd) = sampler.sample_errors(rng);
        let h_sr = hbar_sr + dh_sr;
        let t_h_rd = design.pattern.apply_rows(&(hbar_rd + dh_rd));
        let (xbar, v) = match source {
            SourceModel::Thp => {
                let bits: Vec<u8> = (0..nb).map(|_| rng.random::<bool>() as u8).collect();
                let s = constellation.map(&bits)?;
                let enc = thp_encode(&s, &design.pattern, &design.u, constellation.order())?;
                (enc.xbar, enc.v)
            }
            SourceModel::Gaussian => {
                let x = CVector::from_fn(d.n_d, |_, _| complex_normal(rng) * s2.sqrt());
                let v = &design.u * &x;
                (x, v)
            }
        };
        let n_sr = CVector::from_fn(d.n_r, |_, _| complex_normal(rng) * budget.sigma_nsr2.sqrt());
        let n_rd = CVector::from_fn(d.n_d, |_, _| complex_normal(rng) * budget.sigma_nrd2.sqrt());
        let y_r = &h_sr * (&design.f_s * xbar) + n_sr;
        let t_n_rd = CVector::from_fn(d.n_d, |i, _| n_rd[perm[i]]);
        let y_d = &t_h_rd * (&design.f_r * y_r) + t_n_rd;
        let e = &design.w * y_d - v;
        total += e.norm_squared();
    }
    Ok(total / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelStatistics, LinkDims};
    use crate::design::{design_branch, evaluate_mse, BranchContext, DesignCase};
    use crate::multibranch::OrderingPattern;
    use crate::rng::{substream, Stream};

    #[test]
    fn gaussian_source_matches_analytic_mse() {
        let stats = ChannelStatistics::build(LinkDims::square(3), 0.0, 0.0, 0.01).unwrap();
        let sampler = ChannelSampler::new(&stats).unwrap();
        let budget = PowerBudget::from_snr_db(20.0, 10.0, 1.0).unwrap();
        let c = QamConstellation::new(16).unwrap();
        let real = sampler.sample(&mut substream(9, 0, Stream::Channel));
        let pat = OrderingPattern::new(0, vec![2, 0, 1]).unwrap();
        let d = design_branch(
            &stats,
            &real.hbar_sr,
            &real.hbar_rd,
            &pat,
            budget,
            10.0,
            DesignCase::A,
        )
        .unwrap();
        let ctx =
            BranchContext::new(&stats, &real.hbar_sr, &real.hbar_rd, &pat, budget, 10.0).unwrap();
        let analytic = evaluate_mse(&d, &ctx);
        let mut rng = substream(9, 0, Stream::Mse);
        let emp = empirical_mse(
            &d,
            &sampler,
            &real.hbar_sr,
            &real.hbar_rd,
            budget,
            &c,
            40_000,
            SourceModel::Gaussian,
            &mut rng,
        )
        .unwrap();
        assert!((emp / analytic - 1.0).abs() < 0.03, "{emp} vs {analytic}");
    }
}
