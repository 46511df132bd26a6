//! Simulation configuration and its flat `key = value` file format.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::{ChannelStatistics, LinkDims};
use crate::design::{check_case, DesignCase};
use crate::error::{Error, Result};
use crate::multibranch::CodebookScheme;
use crate::thp::QamConstellation;

/// Which transceiver a simulated curve uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    /// Robust design with the configured ordering codebook.
    Mbthp,
    /// Robust design, identity ordering only.
    ThpSingle,
    /// Identity ordering, designed as if the estimated channels were exact.
    ThpNonrobust,
    /// No precoding: scaled-identity source and relay, Wiener receiver.
    Naf,
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::Mbthp => "mbthp",
            Baseline::ThpSingle => "thp_single",
            Baseline::ThpNonrobust => "thp_nonrobust",
            Baseline::Naf => "naf",
        })
    }
}

impl FromStr for Baseline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mbthp" => Ok(Baseline::Mbthp),
            "thp_single" => Ok(Baseline::ThpSingle),
            "thp_nonrobust" => Ok(Baseline::ThpNonrobust),
            "naf" => Ok(Baseline::Naf),
            other => Err(Error::Config(format!("unknown baseline '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_s: usize,
    pub n_r: usize,
    pub n_d: usize,
    /// QAM order.
    pub m: usize,
    /// Symbol vectors per block.
    pub k: usize,
    pub scheme: CodebookScheme,
    /// Number of branches; forced to 1 for `single` and `N_d!` for `exhaustive`.
    pub l: usize,
    pub case: DesignCase,
    pub snr_sr_db: f64,
    pub snr_rd_db: Vec<f64>,
    pub sigma_e2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub blocks: usize,
    pub seed: u64,
    pub si_error_rate: f64,
    pub baseline: Vec<Baseline>,
    /// Stored FSB codebook; trained on the fly when absent.
    pub fsb_codebook: Option<PathBuf>,
    /// Training experiments for an on-the-fly FSB codebook.
    pub fsb_experiments: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_s: 4,
            n_r: 4,
            n_d: 4,
            m: 16,
            k: 100,
            scheme: CodebookScheme::Psp,
            l: 4,
            case: DesignCase::A,
            snr_sr_db: 30.0,
            snr_rd_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            sigma_e2: 0.001,
            alpha: 0.0,
            beta: 0.0,
            blocks: 2000,
            seed: 1,
            si_error_rate: 0.0,
            baseline: vec![Baseline::Mbthp],
            fsb_codebook: None,
            fsb_experiments: 10_000,
        }
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

impl SimConfig {
    pub fn dims(&self) -> Result<LinkDims> {
        LinkDims::new(self.n_s, self.n_r, self.n_d)
    }

    pub fn statistics(&self) -> Result<ChannelStatistics> {
        ChannelStatistics::build(self.dims()?, self.alpha, self.beta, self.sigma_e2)
    }

    /// Branch count after applying the scheme's own constraint.
    pub fn branches(&self) -> usize {
        match self.scheme {
            CodebookScheme::Single => 1,
            CodebookScheme::Exhaustive => factorial(self.n_d),
            _ => self.l,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.dims().map_err(|e| Error::Config(e.to_string()))?;
        QamConstellation::new(self.m).map_err(|e| Error::Config(e.to_string()))?;
        if self.k == 0 {
            return bad("k (block length) must be at least 1".into());
        }
        if self.blocks == 0 {
            return bad("blocks must be at least 1".into());
        }
        let l = self.branches();
        if l == 0 || l > factorial(self.n_d) {
            return bad(format!("L = {l} must lie in 1..={}", factorial(self.n_d)));
        }
        if !(0.0..=1.0).contains(&self.si_error_rate) {
            return bad(format!(
                "si_error_rate {} outside [0, 1]",
                self.si_error_rate
            ));
        }
        if !(0.0..1.0).contains(&self.sigma_e2) {
            return bad(format!("sigma_e2 {} outside [0, 1)", self.sigma_e2));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} {v} outside [0, 1)"));
            }
        }
        if self.snr_rd_db.is_empty() {
            return bad("snr_rd_db needs at least one value".into());
        }
        if self
            .snr_rd_db
            .iter()
            .chain([&self.snr_sr_db])
            .any(|v| !v.is_finite())
        {
            return bad("SNR values must be finite".into());
        }
        if self.baseline.is_empty() {
            return bad("baseline list is empty".into());
        }
        if self.scheme == CodebookScheme::Fsb
            && self.fsb_codebook.is_none()
            && self.fsb_experiments == 0
        {
            return bad("fsb needs a codebook file or fsb_experiments > 0".into());
        }
        check_case(&self.statistics()?, self.case).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, path)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines on top of the current values. `#` starts
    /// a comment; blank lines are ignored.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(msg) => err(msg),
                other => other,
            })?;
        }
        Ok(())
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("invalid value '{v}' for {key}")))
        }
        fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| num(key, s))
                .collect()
        }
        match key {
            "n_s" => self.n_s = num(key, value)?,
            "n_r" => self.n_r = num(key, value)?,
            "n_d" => self.n_d = num(key, value)?,
            "m" => self.m = num(key, value)?,
            "k" | "K" => self.k = num(key, value)?,
            "scheme" => self.scheme = value.parse()?,
            "l" | "L" | "branches" => self.l = num(key, value)?,
            "case" => self.case = value.parse()?,
            "snr_sr_db" => self.snr_sr_db = num(key, value)?,
            "snr_rd_db" => self.snr_rd_db = list(key, value)?,
            "sigma_e2" => self.sigma_e2 = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "blocks" => self.blocks = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "si_error_rate" => self.si_error_rate = num(key, value)?,
            "baseline" => {
                self.baseline = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "fsb_codebook" => {
                self.fsb_codebook = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            "fsb_experiments" => self.fsb_experiments = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }
}
