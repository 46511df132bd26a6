//! Monte-Carlo link simulation: configuration, baselines, block simulation,
//! sweeps and their output files.

pub mod baselines;
pub mod codebooks;
pub mod complexity;
pub mod config;
pub mod mse;
pub mod output;
pub mod sim;

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::multibranch::BranchCodebook;

pub use baselines::{baseline_thp_nonrobust, inject_si_error, naf_design, NafDesign};
pub use codebooks::{codebook_for, fsb_histogram, train_fsb};
pub use complexity::{complexity_estimate, ComplexityTable};
pub use config::{Baseline, SimConfig};
pub use mse::{empirical_mse, SourceModel};
pub use output::{format_csv, parse_csv, read_csv, write_csv, write_plot_data, CsvRow, CSV_HEADER};
pub use sim::{
    paired_difference, run_block, simulate, BlockOutcome, PairedDifference, Scenario, SimResult,
};

/// Every configured baseline at every relay SNR, baseline-major. An FSB
/// codebook without a stored file is trained once, at the first SNR point.
pub fn sweep(cfg: &SimConfig) -> Result<Vec<SimResult>> {
    cfg.validate()?;
    let codebook = if cfg.baseline.contains(&Baseline::Mbthp) {
        codebook_for(cfg, cfg.snr_rd_db[0])?
    } else {
        BranchCodebook::single(cfg.n_d)
    };
    let mut results = Vec::new();
    for &b in &cfg.baseline {
        for &snr in &cfg.snr_rd_db {
            let scn = Scenario::new(cfg, b, snr, &codebook)?;
            results.push(simulate(&scn, cfg.blocks)?);
        }
    }
    Ok(results)
}

/// Writes `results.csv` and one plot-data file per curve into `dir`.
pub fn write_outputs(dir: &Path, results: &[SimResult]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join("results.csv");
    write_csv(&csv, results)?;
    let mut files = vec![csv];
    files.extend(write_plot_data(dir, results)?);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multibranch::CodebookScheme;

    #[test]
    fn sweep_covers_every_point_and_writes_files() {
        let cfg = SimConfig {
            n_s: 2,
            n_r: 2,
            n_d: 2,
            k: 5,
            l: 2,
            blocks: 4,
            snr_rd_db: vec![5.0, 10.0],
            baseline: vec![Baseline::Mbthp, Baseline::Naf],
            scheme: CodebookScheme::Psp,
            ..SimConfig::default()
        };
        let results = sweep(&cfg).unwrap();
        let labels: Vec<(&str, f64)> = results
            .iter()
            .map(|r| (r.label.as_str(), r.snr_rd_db))
            .collect();
        assert_eq!(
            labels,
            vec![
                ("mbthp_psp", 5.0),
                ("mbthp_psp", 10.0),
                ("naf", 5.0),
                ("naf", 10.0)
            ]
        );
        let dir = tempfile::tempdir().unwrap();
        let files = write_outputs(dir.path(), &results).unwrap();
        assert_eq!(files.len(), 3);
        let rows = read_csv(&files[0]).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[2], CsvRow::from(&results[2]));
    }

    #[test]
    fn io_errors_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        match write_outputs(&blocker.join("sub"), &[]) {
            Err(Error::Io { path, .. }) => assert!(path.ends_with("sub")),
            other => panic!("{other:?}"),
        }
    }
}
