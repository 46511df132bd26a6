//! Builds the ordering codebook a configuration asks for, including FSB
//! training against the exhaustive codebook.

use rayon::prelude::*;

use crate::channel::ChannelSampler;
use crate::design::{design_branch, PowerBudget};
use crate::error::{Error, Result};
use crate::multibranch::{
    fsb_from_histogram, psp_codebook, read_fsb, select_branch, BranchCodebook, CodebookScheme,
    FsbMeta,
};
use crate::rng::{substream, Stream};
use crate::thp::QamConstellation;

use super::config::SimConfig;
use super::sim::{draw_block, NOISE_POWER};

/// Winning exhaustive-codebook index of training experiment `e`.
pub fn training_winner(
    cfg: &SimConfig,
    sampler: &ChannelSampler,
    full: &BranchCodebook,
    budget: PowerBudget,
    e: usize,
) -> Result<usize> {
    let c = QamConstellation::new(cfg.m)?;
    let mut rng = substream(cfg.seed, e as u64, Stream::Training);
    let real = sampler.sample(&mut rng);
    let (_, block) = draw_block(&c, cfg.n_d, cfg.k, &mut rng)?;
    let designs = full
        .patterns
        .iter()
        .map(|p| {
            design_branch(
                sampler.stats(),
                &real.hbar_sr,
                &real.hbar_rd,
                p,
                budget,
                c.sigma_s2(),
                cfg.case,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(select_branch(&designs, &block, &real.hbar_sr, &real.hbar_rd, &c)?.l_opt)
}

/// Win counts of every exhaustive-codebook index over `n_e` training
/// experiments at the given relay SNR. Experiments run in parallel.
pub fn fsb_histogram(cfg: &SimConfig, snr_rd_db: f64, n_e: usize) -> Result<Vec<usize>> {
    let stats = cfg.statistics()?;
    let sampler = ChannelSampler::new(&stats)?;
    let budget = PowerBudget::from_snr_db(cfg.snr_sr_db, snr_rd_db, NOISE_POWER)?;
    let full = BranchCodebook::exhaustive(cfg.n_d)?;
    let winners = (0..n_e)
        .into_par_iter()
        .map(|e| training_winner(cfg, &sampler, &full, budget, e))
        .collect::<Result<Vec<_>>>()?;
    let mut hist = vec![0usize; full.len()];
    for w in winners {
        hist[w] += 1;
    }
    Ok(hist)
}

/// Trains an FSB codebook of `cfg.branches()` entries from `n_e`
/// experiments at the given relay SNR.
pub fn train_fsb(cfg: &SimConfig, snr_rd_db: f64, n_e: usize) -> Result<(FsbMeta, BranchCodebook)> {
    let hist = fsb_histogram(cfg, snr_rd_db, n_e)?;
    let l = cfg.branches();
    let cb = fsb_from_histogram(&BranchCodebook::exhaustive(cfg.n_d)?, &hist, l)?;
    let meta = FsbMeta {
        n_s: cfg.n_d,
        l,
        n_e,
        seed: cfg.seed,
    };
    Ok((meta, cb))
}

/// The codebook for the `mbthp` curve. FSB loads `fsb_codebook` when set and
/// otherwise trains at `train_snr_rd_db`.
pub fn codebook_for(cfg: &SimConfig, train_snr_rd_db: f64) -> Result<BranchCodebook> {
    let n = cfg.n_d;
    match cfg.scheme {
        CodebookScheme::Single => Ok(BranchCodebook::single(n)),
        CodebookScheme::Exhaustive => BranchCodebook::exhaustive(n),
        CodebookScheme::Psp => psp_codebook(n, cfg.l),
        CodebookScheme::Fsb => match &cfg.fsb_codebook {
            Some(path) => {
                let (meta, cb) = read_fsb(path)?;
                if meta.n_s != n || meta.l != cfg.l {
                    return Err(Error::Config(format!(
                        "{} holds L={} orderings of {} streams, configuration wants L={} of {n}",
                        path.display(),
                        meta.l,
                        meta.n_s,
                        cfg.l
                    )));
                }
                Ok(cb)
            }
            None => Ok(train_fsb(cfg, train_snr_rd_db, cfg.fsb_experiments)?.1),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multibranch::write_fsb;

    fn cfg() -> SimConfig {
        SimConfig {
            n_s: 3,
            n_r: 3,
            n_d: 3,
            k: 10,
            l: 3,
            scheme: CodebookScheme::Fsb,
            ..SimConfig::default()
        }
    }

    #[test]
    fn training_is_deterministic_and_sized() {
        let c = cfg();
        let (meta, a) = train_fsb(&c, 15.0, 40).unwrap();
        let (_, b) = train_fsb(&c, 15.0, 40).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_eq!((meta.n_s, meta.l, meta.n_e), (3, 3, 40));
        let hist = fsb_histogram(&c, 15.0, 40).unwrap();
        assert_eq!(hist.iter().sum::<usize>(), 40);
        let full = BranchCodebook::exhaustive(3).unwrap();
        assert_eq!(fsb_from_histogram(&full, &hist, 3).unwrap(), a);
    }

    #[test]
    fn stored_codebook_is_loaded_and_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fsb.txt");
        let (meta, cb) = train_fsb(&cfg(), 15.0, 10).unwrap();
        write_fsb(&path, &meta, &cb).unwrap();
        let c = SimConfig {
            fsb_codebook: Some(path.clone()),
            ..cfg()
        };
        assert_eq!(codebook_for(&c, 0.0).unwrap(), cb);
        let wrong = SimConfig { l: 2, ..c };
        assert!(matches!(codebook_for(&wrong, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn fixed_schemes_need_no_training() {
        let mut c = cfg();
        c.scheme = CodebookScheme::Exhaustive;
        assert_eq!(codebook_for(&c, 0.0).unwrap().len(), 6);
        c.scheme = CodebookScheme::Single;
        assert_eq!(codebook_for(&c, 0.0).unwrap().len(), 1);
        c.scheme = CodebookScheme::Psp;
        assert_eq!(codebook_for(&c, 0.0).unwrap().len(), 3);
    }
}
