//! Comparison transceivers and side-information corruption.

use rand::Rng;

use crate::channel::ChannelStatistics;
use crate::design::{design_branch, BranchContext, BranchDesign, DesignCase, PowerBudget};
use crate::error::Result;
use crate::linalg::{c64, identity, CMatrix};
use crate::multibranch::{feedforward_bits, OrderingPattern};

/// Branch index seen by the relay and destination after the feedforward
/// bits cross a binary symmetric channel.
///
/// `rate` is the probability that the index arrives wrong; each of the
/// `ceil(log2 L)` bits flips with `1 - (1 - rate)^(1/B)`. Indices that land
/// past `L - 1` wrap modulo `L`.
pub fn inject_si_error<R: Rng + ?Sized>(
    l_opt: usize,
    l_total: usize,
    rate: f64,
    rng: &mut R,
) -> usize {
    let b = feedforward_bits(l_total);
    if b == 0 || rate <= 0.0 {
        return l_opt;
    }
    let p = 1.0 - (1.0 - rate.min(1.0)).powf(1.0 / b as f64);
    let mut idx = l_opt;
    for bit in 0..b {
        if rng.random::<f64>() < p {
            idx ^= 1 << bit;
        }
    }
    idx % l_total
}

/// Non-precoded amplify-and-forward link with a Wiener receiver.
#[derive(Debug, Clone)]
pub struct NafDesign {
    pub f_s: CMatrix,
    pub f_r: CMatrix,
    pub w: CMatrix,
}

/// `F_s` sends each stream on its own antenna at equal power, `F_r` is the
/// scaled identity meeting the expected relay power, and `W` is the MMSE
/// filter under `stats`.
pub fn naf_design(
    stats: &ChannelStatistics,
    hbar_sr: &CMatrix,
    hbar_rd: &CMatrix,
    budget: PowerBudget,
    sigma_s2: f64,
) -> Result<NafDesign> {
    let d = stats.dims;
    let ctx = BranchContext::new(
        stats,
        hbar_sr,
        hbar_rd,
        &OrderingPattern::identity(d.n_d),
        budget,
        sigma_s2,
    )?;
    let gs = (budget.p_s / (sigma_s2 * d.n_d as f64)).sqrt();
    let f_s = CMatrix::from_fn(d.n_s, d.n_d, |i, j| c64(if i == j { gs } else { 0.0 }, 0.0));
    let r_r = ctx.relay_covariance(&f_s);
    let gr = (budget.p_r / r_r.trace().re).sqrt();
    let f_r = identity(d.n_r) * c64(gr, 0.0);
    let w = ctx.mmse_receiver(&f_s, &f_r, &identity(d.n_d))?;
    Ok(NafDesign { f_s, f_r, w })
}

/// Single-branch design that treats the estimated channels as exact.
///
/// Designed on the estimated channels alone, the relay matrix would exceed
/// its budget once the channel error is accounted for. It is rescaled to
/// meet `P_r` in expectation under the true `stats`, and the receiver is
/// recomputed, still on the estimated channels, for the rescaled relay.
pub fn baseline_thp_nonrobust(
    stats: &ChannelStatistics,
    hbar_sr: &CMatrix,
    hbar_rd: &CMatrix,
    budget: PowerBudget,
    sigma_s2: f64,
    case: DesignCase,
) -> Result<BranchDesign> {
    let estimated = stats.perfect_csi();
    let pattern = OrderingPattern::identity(stats.dims.n_d);
    let mut d = design_branch(
        &estimated, hbar_sr, hbar_rd, &pattern, budget, sigma_s2, case,
    )?;
    if stats.sigma_e2 > 0.0 {
        let truth = BranchContext::new(stats, hbar_sr, hbar_rd, &pattern, budget, sigma_s2)?;
        let scale = (budget.p_r / truth.relay_expected_power(&d.f_s, &d.f_r)).sqrt();
        d.f_r *= c64(scale, 0.0);
        let est = BranchContext::new(&estimated, hbar_sr, hbar_rd, &pattern, budget, sigma_s2)?;
        d.w = est.mmse_receiver(&d.f_s, &d.f_r, &d.u)?;
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_realization, LinkDims};
    use crate::rng::{substream, Stream};

    #[test]
    fn zero_rate_is_identity_and_full_rate_flips() {
        let mut rng = substream(1, 0, Stream::SideInfo);
        for l in 0..8 {
            assert_eq!(inject_si_error(l, 8, 0.0, &mut rng), l);
        }
        for _ in 0..100 {
            assert_eq!(inject_si_error(0, 2, 1.0, &mut rng), 1);
            assert_eq!(inject_si_error(1, 2, 1.0, &mut rng), 0);
        }
        assert_eq!(inject_si_error(0, 1, 1.0, &mut rng), 0);
        for _ in 0..1000 {
            assert!(inject_si_error(23, 24, 0.5, &mut rng) < 24);
        }
    }

    #[test]
    fn index_error_frequency_matches_rate() {
        let mut rng = substream(2, 0, Stream::SideInfo);
        let n = 100_000;
        let wrong = (0..n)
            .filter(|i| {
                let l = i % 8;
                inject_si_error(l, 8, 0.01, &mut rng) != l
            })
            .count();
        let freq = wrong as f64 / n as f64;
        assert!((freq - 0.01).abs() < 0.001, "{freq}");
    }

    #[test]
    fn naf_meets_budgets() {
        let stats =
            ChannelStatistics::build(LinkDims::new(4, 3, 2).unwrap(), 0.0, 0.0, 0.01).unwrap();
        let mut rng = substream(3, 0, Stream::Channel);
        let budget = PowerBudget::new(100.0, 30.0, 1.0, 1.0).unwrap();
        for _ in 0..10 {
            let real = sample_realization(&stats, &mut rng).unwrap();
            let naf = naf_design(&stats, &real.hbar_sr, &real.hbar_rd, budget, 10.0).unwrap();
            let ctx = BranchContext::new(
                &stats,
                &real.hbar_sr,
                &real.hbar_rd,
                &OrderingPattern::identity(2),
                budget,
                10.0,
            )
            .unwrap();
            assert!((ctx.source_power(&naf.f_s) - 100.0).abs() < 1e-9);
            assert!((ctx.relay_expected_power(&naf.f_s, &naf.f_r) - 30.0).abs() < 1e-9);
        }
    }

    #[test]
    fn nonrobust_equals_robust_without_errors() {
        let stats = ChannelStatistics::build(LinkDims::square(3), 0.0, 0.0, 0.0).unwrap();
        let mut rng = substream(4, 0, Stream::Channel);
        let budget = PowerBudget::new(1000.0, 100.0, 1.0, 1.0).unwrap();
        let real = sample_realization(&stats, &mut rng).unwrap();
        for case in [DesignCase::A, DesignCase::B] {
            let nr =
                baseline_thp_nonrobust(&stats, &real.hbar_sr, &real.hbar_rd, budget, 10.0, case)
                    .unwrap();
            let rb = design_branch(
                &stats,
                &real.hbar_sr,
                &real.hbar_rd,
                &OrderingPattern::identity(3),
                budget,
                10.0,
                case,
            )
            .unwrap();
            for (a, b) in [
                (&nr.f_s, &rb.f_s),
                (&nr.f_r, &rb.f_r),
                (&nr.u, &rb.u),
                (&nr.w, &rb.w),
            ] {
                assert!((a - b).norm() <= 1e-8 * b.norm().max(1.0));
            }
        }
    }
}
