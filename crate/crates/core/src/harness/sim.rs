//! Block-level Monte-Carlo simulation.
//!
//! A [`Scenario`] fixes everything about one curve point except the trial
//! index. [`run_block`] draws one channel realization, designs every branch
//! on the estimated channels, selects a branch, sends `K` symbol vectors over
//! the true channels and counts bit errors. Every random draw comes from a
//! substream keyed by `(seed, trial)`, so two scenarios with the same seed see
//! the same channels, data and noise block for block.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{ChannelRealization, ChannelSampler, ChannelStatistics};
use crate::design::{design_branch, BranchContext, BranchDesign, DesignCase, PowerBudget};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::multibranch::{select_branch, BranchCodebook, OrderingPattern};
use crate::rng::{complex_normal, substream, Stream};
use crate::thp::{receiver_detect, thp_encode, QamConstellation};

use super::baselines::{baseline_thp_nonrobust, inject_si_error, naf_design, NafDesign};
use super::config::{Baseline, SimConfig};

/// Noise variance at both receivers; SNRs set the budgets.
pub const NOISE_POWER: f64 = 1.0;

#[derive(Debug, Clone)]
pub enum Transceiver {
    /// THP with one design per codebook entry. Non-robust designs trust the
    /// estimated channels and hold a single identity ordering.
    Thp {
        codebook: BranchCodebook,
        robust: bool,
    },
    Naf,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub label: String,
    pub baseline: Baseline,
    /// Statistics of the true channels.
    pub stats: ChannelStatistics,
    pub case: DesignCase,
    pub budget: PowerBudget,
    pub constellation: QamConstellation,
    pub k: usize,
    pub transceiver: Transceiver,
    pub si_error_rate: f64,
    pub seed: u64,
    pub snr_sr_db: f64,
    pub snr_rd_db: f64,
    sampler: ChannelSampler,
}

impl Scenario {
    /// `codebook` is used only by the `mbthp` baseline.
    pub fn new(
        cfg: &SimConfig,
        baseline: Baseline,
        snr_rd_db: f64,
        codebook: &BranchCodebook,
    ) -> Result<Self> {
        let stats = cfg.statistics()?;
        let n = cfg.n_d;
        let (label, transceiver) = match baseline {
            Baseline::Mbthp => (
                format!("mbthp_{}", codebook.scheme),
                Transceiver::Thp {
                    codebook: codebook.clone(),
                    robust: true,
                },
            ),
            Baseline::ThpSingle => (
                baseline.to_string(),
                Transceiver::Thp {
                    codebook: BranchCodebook::single(n),
                    robust: true,
                },
            ),
            Baseline::ThpNonrobust => (
                baseline.to_string(),
                Transceiver::Thp {
                    codebook: BranchCodebook::single(n),
                    robust: false,
                },
            ),
            Baseline::Naf => (baseline.to_string(), Transceiver::Naf),
        };
        if let Transceiver::Thp { codebook, .. } = &transceiver {
            if codebook.is_empty() || codebook.patterns[0].perm.len() != n {
                return Err(Error::Config(format!(
                    "codebook does not hold orderings of {n} streams"
                )));
            }
        }
        Ok(Self {
            label,
            baseline,
            sampler: ChannelSampler::new(&stats)?,
            stats,
            case: cfg.case,
            budget: PowerBudget::from_snr_db(cfg.snr_sr_db, snr_rd_db, NOISE_POWER)?,
            constellation: QamConstellation::new(cfg.m)?,
            k: cfg.k,
            transceiver,
            si_error_rate: cfg.si_error_rate,
            seed: cfg.seed,
            snr_sr_db: cfg.snr_sr_db,
            snr_rd_db,
        })
    }

    pub fn branches(&self) -> usize {
        match &self.transceiver {
            Transceiver::Thp { codebook, .. } => codebook.len(),
            Transceiver::Naf => 1,
        }
    }

    pub fn sampler(&self) -> &ChannelSampler {
        &self.sampler
    }

    pub fn bits_per_block(&self) -> u64 {
        (self.k * self.stats.dims.n_d * self.constellation.bits_per_symbol()) as u64
    }

    /// Designs every branch on the estimated channels of `real`.
    pub fn design_all(&self, real: &ChannelRealization) -> Result<Vec<BranchDesign>> {
        let Transceiver::Thp { codebook, robust } = &self.transceiver else {
            return Err(Error::contract("NAF has no branch designs"));
        };
        let s2 = self.constellation.sigma_s2();
        if !robust {
            let d = baseline_thp_nonrobust(
                &self.stats,
                &real.hbar_sr,
                &real.hbar_rd,
                self.budget,
                s2,
                self.case,
            )?;
            return Ok(vec![d]);
        }
        codebook
            .patterns
            .iter()
            .map(|p| {
                design_branch(
                    &self.stats,
                    &real.hbar_sr,
                    &real.hbar_rd,
                    p,
                    self.budget,
                    s2,
                    self.case,
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockOutcome {
    pub bit_errors: u64,
    pub bits: u64,
    /// Sum of `||v_hat - v||^2` over the block.
    pub sq_error: f64,
    pub vectors: u64,
    pub converged: bool,
    /// Branch chosen by the source.
    pub selected: usize,
    /// Branch the relay and destination used.
    pub used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub label: String,
    pub case: DesignCase,
    pub l: usize,
    pub n_s: usize,
    pub n_r: usize,
    pub n_d: usize,
    pub m: usize,
    pub k: usize,
    pub snr_sr_db: f64,
    pub snr_rd_db: f64,
    pub sigma_e2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub block_count: usize,
    pub bit_count: u64,
    pub error_count: u64,
    pub ber: f64,
    /// Mean `||v_hat - v||^2` per symbol vector.
    pub mse: f64,
    pub converged_fraction: f64,
    pub block_errors: Vec<u64>,
    /// How often the source picked each branch.
    pub branch_histogram: Vec<u64>,
}

impl SimResult {
    /// Standard error of the BER estimate, treating blocks as the
    /// independent unit.
    pub fn standard_error(&self) -> f64 {
        let per_block = self.bit_count as f64 / self.block_count as f64;
        let rates: Vec<f64> = self
            .block_errors
            .iter()
            .map(|&e| e as f64 / per_block)
            .collect();
        mean_and_se(&rates).1
    }
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean and standard error of the per-block BER difference `a - b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedDifference {
    pub mean: f64,
    pub se: f64,
}

/// Paired comparison of two results simulated over the same trial indices.
pub fn paired_difference(a: &SimResult, b: &SimResult) -> Result<PairedDifference> {
    if a.block_count != b.block_count || a.bit_count != b.bit_count {
        return Err(Error::contract(
            "paired results need equal block and bit counts",
        ));
    }
    let per_block = a.bit_count as f64 / a.block_count as f64;
    let d: Vec<f64> = a
        .block_errors
        .iter()
        .zip(&b.block_errors)
        .map(|(&x, &y)| (x as f64 - y as f64) / per_block)
        .collect();
    let (mean, se) = mean_and_se(&d);
    Ok(PairedDifference { mean, se })
}

pub fn count_bit_errors(sent: &[u8], received: &[u8]) -> u64 {
    sent.iter().zip(received).filter(|(a, b)| a != b).count() as u64
}

fn noise_vector<R: Rng + ?Sized>(n: usize, variance: f64, rng: &mut R) -> CVector {
    let s = variance.sqrt();
    CVector::from_fn(n, |_, _| complex_normal(rng) * s)
}

/// `(T v)_i = v_{perm[i]}`
fn permute(p: &OrderingPattern, v: &CVector) -> CVector {
    CVector::from_fn(v.len(), |i, _| v[p.perm[i]])
}

/// Source bits and the matching symbols, one entry per symbol vector.
pub type Block = (Vec<Vec<u8>>, Vec<Vec<Complex64>>);

/// Draws `k` vectors of `n` symbols with their source bits.
pub fn draw_block<R: Rng + ?Sized>(
    c: &QamConstellation,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<Block> {
    let nb = n * c.bits_per_symbol();
    let mut bits = Vec::with_capacity(k);
    let mut symbols = Vec::with_capacity(k);
    for _ in 0..k {
        let b: Vec<u8> = (0..nb).map(|_| rng.random::<bool>() as u8).collect();
        symbols.push(c.map(&b)?);
        bits.push(b);
    }
    Ok((bits, symbols))
}

/// One block: channel draw, per-branch design, selection, transmission.
pub fn run_block(scn: &Scenario, trial: u64) -> Result<BlockOutcome> {
    let real = scn
        .sampler
        .sample(&mut substream(scn.seed, trial, Stream::Channel));
    let n = scn.stats.dims.n_d;
    let (bits, block) = draw_block(
        &scn.constellation,
        n,
        scn.k,
        &mut substream(scn.seed, trial, Stream::Data),
    )?;
    let mut noise = substream(scn.seed, trial, Stream::Noise);
    match &scn.transceiver {
        Transceiver::Thp { .. } => {
            let designs = scn.design_all(&real)?;
            let converged = designs.iter().all(BranchDesign::converged);
            let selected = if designs.len() == 1 {
                0
            } else {
                select_branch(
                    &designs,
                    &block,
                    &real.hbar_sr,
                    &real.hbar_rd,
                    &scn.constellation,
                )?
                .l_opt
            };
            let used = inject_si_error(
                selected,
                designs.len(),
                scn.si_error_rate,
                &mut substream(scn.seed, trial, Stream::SideInfo),
            );
            let mut out = transmit_thp(
                &designs[selected],
                &designs[used],
                &real,
                scn,
                &bits,
                &block,
                &mut noise,
            )?;
            out.converged = converged;
            out.selected = selected;
            out.used = used;
            Ok(out)
        }
        Transceiver::Naf => {
            let naf = naf_design(
                &scn.stats,
                &real.hbar_sr,
                &real.hbar_rd,
                scn.budget,
                scn.constellation.sigma_s2(),
            )?;
            transmit_naf(&naf, &real, scn, &bits, &block, &mut noise)
        }
    }
}

/// Source precodes with `src`; relay and destination use `dst`'s ordering,
/// relay matrix and receiver.
fn transmit_thp<R: Rng + ?Sized>(
    src: &BranchDesign,
    dst: &BranchDesign,
    real: &ChannelRealization,
    scn: &Scenario,
    bits: &[Vec<u8>],
    block: &[Vec<Complex64>],
    noise: &mut R,
) -> Result<BlockOutcome> {
    let d = scn.stats.dims;
    let c = &scn.constellation;
    let t_h_rd = dst.pattern.apply_rows(&real.h_rd);
    let relay: CMatrix = &t_h_rd * &dst.f_r;
    let mut bit_errors = 0;
    let mut sq_error = 0.0;
    for (s, b) in block.iter().zip(bits) {
        let enc = thp_encode(s, &src.pattern, &src.u, c.order())?;
        let y_r =
            &real.h_sr * (&src.f_s * &enc.xbar) + noise_vector(d.n_r, scn.budget.sigma_nsr2, noise);
        let n_rd = noise_vector(d.n_d, scn.budget.sigma_nrd2, noise);
        let y_d = &relay * y_r + permute(&dst.pattern, &n_rd);
        let v_hat = &dst.w * y_d;
        sq_error += (&v_hat - &enc.v).norm_squared();
        let detected = receiver_detect(&v_hat, &dst.pattern, c);
        bit_errors += count_bit_errors(b, &c.demap(&detected));
    }
    Ok(BlockOutcome {
        bit_errors,
        bits: scn.bits_per_block(),
        sq_error,
        vectors: block.len() as u64,
        converged: true,
        selected: 0,
        used: 0,
    })
}

fn transmit_naf<R: Rng + ?Sized>(
    naf: &NafDesign,
    real: &ChannelRealization,
    scn: &Scenario,
    bits: &[Vec<u8>],
    block: &[Vec<Complex64>],
    noise: &mut R,
) -> Result<BlockOutcome> {
    let d = scn.stats.dims;
    let c = &scn.constellation;
    let relay: CMatrix = &real.h_rd * &naf.f_r;
    let mut bit_errors = 0;
    let mut sq_error = 0.0;
    for (s, b) in block.iter().zip(bits) {
        let s = CVector::from_column_slice(s);
        let y_r = &real.h_sr * (&naf.f_s * &s) + noise_vector(d.n_r, scn.budget.sigma_nsr2, noise);
        let y_d = &relay * y_r + noise_vector(d.n_d, scn.budget.sigma_nrd2, noise);
        let s_hat = &naf.w * y_d;
        sq_error += (&s_hat - &s).norm_squared();
        let detected: Vec<Complex64> = s_hat.iter().map(|&v| c.quantize(v)).collect();
        bit_errors += count_bit_errors(b, &c.demap(&detected));
    }
    Ok(BlockOutcome {
        bit_errors,
        bits: scn.bits_per_block(),
        sq_error,
        vectors: block.len() as u64,
        converged: true,
        selected: 0,
        used: 0,
    })
}

/// Runs trials `0..blocks` in parallel and aggregates them in trial order.
pub fn simulate(scn: &Scenario, blocks: usize) -> Result<SimResult> {
    if blocks == 0 {
        return Err(Error::Config("blocks must be at least 1".into()));
    }
    let outcomes = (0..blocks as u64)
        .into_par_iter()
        .map(|t| run_block(scn, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(scn, &outcomes))
}

pub fn aggregate(scn: &Scenario, outcomes: &[BlockOutcome]) -> SimResult {
    let d = scn.stats.dims;
    let mut hist = vec![0u64; scn.branches()];
    let (mut bits, mut errors, mut sq, mut vectors, mut conv) = (0u64, 0u64, 0.0, 0u64, 0usize);
    for o in outcomes {
        bits += o.bits;
        errors += o.bit_errors;
        sq += o.sq_error;
        vectors += o.vectors;
        conv += o.converged as usize;
        hist[o.selected] += 1;
    }
    SimResult {
        label: scn.label.clone(),
        case: scn.case,
        l: scn.branches(),
        n_s: d.n_s,
        n_r: d.n_r,
        n_d: d.n_d,
        m: scn.constellation.order(),
        k: scn.k,
        snr_sr_db: scn.snr_sr_db,
        snr_rd_db: scn.snr_rd_db,
        sigma_e2: scn.stats.sigma_e2,
        alpha: scn.stats.alpha,
        beta: scn.stats.beta,
        block_count: outcomes.len(),
        bit_count: bits,
        error_count: errors,
        ber: errors as f64 / bits as f64,
        mse: sq / vectors as f64,
        converged_fraction: conv as f64 / outcomes.len() as f64,
        block_errors: outcomes.iter().map(|o| o.bit_errors).collect(),
        branch_histogram: hist,
    }
}

/// Analysis context of a design on the true statistics.
pub fn true_context(
    scn: &Scenario,
    real: &ChannelRealization,
    design: &BranchDesign,
) -> Result<BranchContext> {
    BranchContext::new(
        &scn.stats,
        &real.hbar_sr,
        &real.hbar_rd,
        &design.pattern,
        scn.budget,
        scn.constellation.sigma_s2(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multibranch::psp_codebook;

    fn small_cfg() -> SimConfig {
        SimConfig {
            n_s: 2,
            n_r: 2,
            n_d: 2,
            k: 20,
            l: 2,
            blocks: 40,
            snr_rd_db: vec![15.0],
            ..SimConfig::default()
        }
    }

    #[test]
    fn repeat_runs_are_identical() {
        let cfg = small_cfg();
        let cb = psp_codebook(2, 2).unwrap();
        let scn = Scenario::new(&cfg, Baseline::Mbthp, 15.0, &cb).unwrap();
        let a = simulate(&scn, 30).unwrap();
        let b = simulate(&scn, 30).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ber, a.error_count as f64 / a.bit_count as f64);
        assert!((0.0..=1.0).contains(&a.ber));
        assert_eq!(a.branch_histogram.iter().sum::<u64>(), 30);
    }

    #[test]
    fn noiseless_perfect_csi_has_no_errors() {
        let cfg = SimConfig {
            sigma_e2: 0.0,
            snr_sr_db: 120.0,
            ..small_cfg()
        };
        let cb = psp_codebook(2, 2).unwrap();
        for b in [Baseline::Mbthp, Baseline::ThpSingle, Baseline::ThpNonrobust] {
            let r = simulate(&Scenario::new(&cfg, b, 120.0, &cb).unwrap(), 20).unwrap();
            assert_eq!(r.error_count, 0, "{b}");
            assert_eq!(r.converged_fraction, 1.0);
        }
    }

    #[test]
    fn single_branch_codebook_matches_thp_single() {
        let cfg = small_cfg();
        let cb = BranchCodebook::single(2);
        let a = simulate(
            &Scenario::new(&cfg, Baseline::Mbthp, 15.0, &cb).unwrap(),
            25,
        )
        .unwrap();
        let b = simulate(
            &Scenario::new(&cfg, Baseline::ThpSingle, 15.0, &cb).unwrap(),
            25,
        )
        .unwrap();
        assert_eq!(a.block_errors, b.block_errors);
        assert_eq!(a.mse, b.mse);
    }

    #[test]
    fn schemes_share_channel_draws() {
        let cfg = small_cfg();
        let cb = psp_codebook(2, 2).unwrap();
        let a = Scenario::new(&cfg, Baseline::Mbthp, 15.0, &cb).unwrap();
        let b = Scenario::new(&cfg, Baseline::Naf, 25.0, &cb).unwrap();
        for t in 0..5 {
            let ra = a
                .sampler()
                .sample(&mut substream(a.seed, t, Stream::Channel));
            let rb = b
                .sampler()
                .sample(&mut substream(b.seed, t, Stream::Channel));
            assert_eq!(ra.h_sr, rb.h_sr);
            assert_eq!(ra.h_rd, rb.h_rd);
        }
    }

    #[test]
    fn ber_estimator_is_consistent() {
        // Flip each bit with a known probability and count as the harness does.
        let p = 0.03;
        let mut rng = substream(5, 0, Stream::Noise);
        let blocks = 400;
        let per = 800;
        let mut errs = Vec::new();
        for _ in 0..blocks {
            let sent: Vec<u8> = (0..per).map(|_| rng.random::<bool>() as u8).collect();
            let recv: Vec<u8> = sent
                .iter()
                .map(|&b| if rng.random::<f64>() < p { b ^ 1 } else { b })
                .collect();
            errs.push(count_bit_errors(&sent, &recv) as f64 / per as f64);
        }
        let (mean, se) = mean_and_se(&errs);
        assert!((mean - p).abs() < 3.0 * se, "{mean} vs {p} (se {se})");
    }

    #[test]
    fn paired_difference_needs_matching_runs() {
        let cfg = small_cfg();
        let cb = psp_codebook(2, 2).unwrap();
        let scn = Scenario::new(&cfg, Baseline::Mbthp, 15.0, &cb).unwrap();
        let a = simulate(&scn, 10).unwrap();
        let b = simulate(&scn, 12).unwrap();
        assert!(paired_difference(&a, &b).is_err());
        let d = paired_difference(&a, &a).unwrap();
        assert_eq!((d.mean, d.se), (0.0, 0.0));
        assert!(simulate(&scn, 0).is_err());
    }

    #[test]
    fn relay_and_destination_follow_injected_branch() {
        let cfg = SimConfig {
            si_error_rate: 1.0,
            ..small_cfg()
        };
        let cb = psp_codebook(2, 2).unwrap();
        let scn = Scenario::new(&cfg, Baseline::Mbthp, 15.0, &cb).unwrap();
        for t in 0..5 {
            let o = run_block(&scn, t).unwrap();
            assert_eq!(o.used, 1 - o.selected);
        }
    }
}
