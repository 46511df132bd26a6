use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mbthp::design::DesignCase;
use mbthp::harness::{
    codebook_for, complexity_estimate, simulate, sweep, train_fsb, write_outputs, Baseline,
    Scenario, SimConfig, SimResult,
};
use mbthp::multibranch::{write_fsb, CodebookScheme};
use mbthp::Result;

#[derive(Parser)]
#[command(
    name = "mbthp",
    version,
    about = "Multi-branch THP relay link simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    scheme: Option<CodebookScheme>,
    #[arg(long, global = true)]
    branches: Option<usize>,
    #[arg(long, global = true)]
    case: Option<DesignCase>,
    /// Probability that the fed-forward branch index arrives wrong.
    #[arg(long, global = true)]
    si_error: Option<f64>,
    /// Comma-separated list of mbthp, thp_single, thp_nonrobust, naf.
    #[arg(long, global = true)]
    baseline: Option<String>,
    #[arg(long, global = true)]
    blocks: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the first relay SNR point of the configuration.
    Run,
    /// Simulate every relay SNR point and write CSV and plot data.
    Sweep,
    /// Train an FSB codebook at the first relay SNR point and store it.
    FsbTrain {
        /// Training experiments; defaults to `fsb_experiments`.
        #[arg(long)]
        experiments: Option<usize>,
    },
    /// Print the per-branch FLOP table for the configured antenna counts.
    Complexity {
        /// Bisection iterations for the source powers.
        #[arg(long, default_value_t = 64)]
        i_s: u64,
        /// Bisection iterations for the relay powers.
        #[arg(long, default_value_t = 64)]
        i_r: u64,
        /// Water-filling sweeps.
        #[arg(long, default_value_t = 20)]
        i_i: u64,
    },
}

fn load_config(c: &Common) -> Result<SimConfig> {
    let mut cfg = match &c.config {
        Some(path) => SimConfig::from_file(path)?,
        None => SimConfig::default(),
    };
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.scheme {
        cfg.scheme = v;
    }
    if let Some(v) = c.branches {
        cfg.l = v;
    }
    if let Some(v) = c.case {
        cfg.case = v;
    }
    if let Some(v) = c.si_error {
        cfg.si_error_rate = v;
    }
    if let Some(v) = &c.baseline {
        cfg.set("baseline", v)?;
    }
    if let Some(v) = c.blocks {
        cfg.blocks = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_results(results: &[SimResult]) {
    println!(
        "{:<18} {:>3} {:>10} {:>12} {:>10} {:>10} {:>7}",
        "scheme", "L", "snr_rd_db", "ber", "ber_se", "mse", "conv"
    );
    for r in results {
        println!(
            "{:<18} {:>3} {:>10.2} {:>12.4e} {:>10.2e} {:>10.4} {:>7.3}",
            r.label,
            r.l,
            r.snr_rd_db,
            r.ber,
            r.standard_error(),
            r.mse,
            r.converged_fraction
        );
    }
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Run => {
            let snr = cfg.snr_rd_db[0];
            let codebook = codebook_for(&cfg, snr)?;
            let results = cfg
                .baseline
                .iter()
                .map(|&b| simulate(&Scenario::new(&cfg, b, snr, &codebook)?, cfg.blocks))
                .collect::<Result<Vec<_>>>()?;
            print_results(&results);
            if let Some(dir) = &cli.common.out {
                for f in write_outputs(dir, &results)? {
                    println!("wrote {}", f.display());
                }
            }
        }
        Command::Sweep => {
            let results = sweep(&cfg)?;
            print_results(&results);
            let dir = cli.common.out.unwrap_or_else(|| PathBuf::from("results"));
            for f in write_outputs(&dir, &results)? {
                println!("wrote {}", f.display());
            }
        }
        Command::FsbTrain { experiments } => {
            let n_e = experiments.unwrap_or(cfg.fsb_experiments);
            let cfg = SimConfig {
                scheme: CodebookScheme::Fsb,
                ..cfg
            };
            let (meta, cb) = train_fsb(&cfg, cfg.snr_rd_db[0], n_e)?;
            let dir = cli.common.out.unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir).map_err(|e| mbthp::Error::io(&dir, e))?;
            let path = dir.join(format!("fsb_n{}_L{}.txt", meta.n_s, meta.l));
            write_fsb(&path, &meta, &cb)?;
            for p in &cb.patterns {
                println!("{:?}", p.perm);
            }
            println!("wrote {}", path.display());
        }
        Command::Complexity { i_s, i_r, i_i } => {
            let l = if cfg.baseline.contains(&Baseline::Mbthp) {
                cfg.branches()
            } else {
                1
            };
            let t = complexity_estimate(
                cfg.n_s as u64,
                cfg.n_r as u64,
                cfg.n_d as u64,
                i_s,
                i_r,
                i_i,
                l as u64,
                cfg.k as u64,
            );
            println!("{t}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
