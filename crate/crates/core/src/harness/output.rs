//! CSV results and per-curve plot data.

use std::fs;
use std::path::{Path, PathBuf};

use crate::design::DesignCase;
use crate::error::{Error, Result};

use super::sim::SimResult;

pub const CSV_HEADER: &str = "scheme,case,L,n_s,n_r,n_d,m,K,snr_sr_db,snr_rd_db,sigma_e2,alpha,beta,blocks,ber,mse,converged_fraction";

/// One CSV line. Real fields hold exactly what ten significant digits
/// represent, so writing and parsing a row reproduces it.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub scheme: String,
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
    pub blocks: usize,
    pub ber: f64,
    pub mse: f64,
    pub converged_fraction: f64,
}

fn fmt_real(x: f64) -> String {
    format!("{x:.9e}")
}

fn round_real(x: f64) -> f64 {
    fmt_real(x).parse().unwrap_or(x)
}

impl From<&SimResult> for CsvRow {
    fn from(r: &SimResult) -> Self {
        Self {
            scheme: r.label.clone(),
            case: r.case,
            l: r.l,
            n_s: r.n_s,
            n_r: r.n_r,
            n_d: r.n_d,
            m: r.m,
            k: r.k,
            snr_sr_db: round_real(r.snr_sr_db),
            snr_rd_db: round_real(r.snr_rd_db),
            sigma_e2: round_real(r.sigma_e2),
            alpha: round_real(r.alpha),
            beta: round_real(r.beta),
            blocks: r.block_count,
            ber: round_real(r.ber),
            mse: round_real(r.mse),
            converged_fraction: round_real(r.converged_fraction),
        }
    }
}

impl CsvRow {
    pub fn to_line(&self) -> String {
        [
            self.scheme.clone(),
            self.case.to_string(),
            self.l.to_string(),
            self.n_s.to_string(),
            self.n_r.to_string(),
            self.n_d.to_string(),
            self.m.to_string(),
            self.k.to_string(),
            fmt_real(self.snr_sr_db),
            fmt_real(self.snr_rd_db),
            fmt_real(self.sigma_e2),
            fmt_real(self.alpha),
            fmt_real(self.beta),
            self.blocks.to_string(),
            fmt_real(self.ber),
            fmt_real(self.mse),
            fmt_real(self.converged_fraction),
        ]
        .join(",")
    }

    fn parse_line(line: &str) -> std::result::Result<Self, String> {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 17 {
            return Err(format!("expected 17 fields, found {}", f.len()));
        }
        fn int(s: &str) -> std::result::Result<usize, String> {
            s.parse().map_err(|_| format!("invalid integer '{s}'"))
        }
        fn real(s: &str) -> std::result::Result<f64, String> {
            s.parse().map_err(|_| format!("invalid number '{s}'"))
        }
        Ok(Self {
            scheme: f[0].to_string(),
            case: f[1].parse().map_err(|e: Error| e.to_string())?,
            l: int(f[2])?,
            n_s: int(f[3])?,
            n_r: int(f[4])?,
            n_d: int(f[5])?,
            m: int(f[6])?,
            k: int(f[7])?,
            snr_sr_db: real(f[8])?,
            snr_rd_db: real(f[9])?,
            sigma_e2: real(f[10])?,
            alpha: real(f[11])?,
            beta: real(f[12])?,
            blocks: int(f[13])?,
            ber: real(f[14])?,
            mse: real(f[15])?,
            converged_fraction: real(f[16])?,
        })
    }
}

pub fn format_csv(rows: &[CsvRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

/// Parses CSV text; `origin` only labels errors.
pub fn parse_csv(text: &str, origin: &Path) -> Result<Vec<CsvRow>> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(err(1, "missing or unexpected header".into())),
    }
    lines
        .map(|(i, l)| CsvRow::parse_line(l).map_err(|m| err(i + 1, m)))
        .collect()
}

pub fn write_csv(path: &Path, results: &[SimResult]) -> Result<()> {
    let rows: Vec<CsvRow> = results.iter().map(CsvRow::from).collect();
    fs::write(path, format_csv(&rows)).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path)
}

/// Writes `<dir>/<label>.dat` with `snr_rd_db ber` columns for every curve,
/// points in the order given. Returns the files written.
pub fn write_plot_data(dir: &Path, results: &[SimResult]) -> Result<Vec<PathBuf>> {
    let mut labels: Vec<&str> = Vec::new();
    for r in results {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    let mut written = Vec::new();
    for label in labels {
        let path = dir.join(format!("{label}.dat"));
        let mut text = String::from("# snr_rd_db ber\n");
        for r in results.iter().filter(|r| r.label == label) {
            text.push_str(&format!("{} {}\n", fmt_real(r.snr_rd_db), fmt_real(r.ber)));
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
