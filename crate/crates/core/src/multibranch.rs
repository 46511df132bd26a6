//! Ordering codebooks, per-block branch selection and the cost of signalling
//! the selected branch.
//!
//! Branch indices are zero-based throughout; branch 0 of every codebook
//! except a trained FSB codebook is the identity ordering.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;

use crate::design::BranchDesign;
use crate::error::{Error, Result};
use crate::linalg::{permutation_matrix, CMatrix, CVector};
use crate::thp::{mod_m, thp_encode, QamConstellation};

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingPattern {
    pub index: usize,
    /// `(T s)_i = s_{perm[i]}`
    pub perm: Vec<usize>,
    pub t: CMatrix,
}

impl OrderingPattern {
    pub fn new(index: usize, perm: Vec<usize>) -> Result<Self> {
        let t = permutation_matrix(&perm)?;
        Ok(Self { index, perm, t })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(0, (0..n).collect()).expect("identity is a permutation")
    }

    /// `T m`: row `i` of the result is row `perm[i]` of `m`.
    pub fn apply_rows(&self, m: &CMatrix) -> CMatrix {
        m.select_rows(self.perm.iter())
    }

    /// `T^T v`: entry `perm[i]` of the result is entry `i` of `v`.
    pub fn restore(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = v[i];
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodebookScheme {
    Single,
    Psp,
    Fsb,
    Exhaustive,
}

impl fmt::Display for CodebookScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodebookScheme::Single => "single",
            CodebookScheme::Psp => "psp",
            CodebookScheme::Fsb => "fsb",
            CodebookScheme::Exhaustive => "exhaustive",
        })
    }
}

impl FromStr for CodebookScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single" => Ok(CodebookScheme::Single),
            "psp" => Ok(CodebookScheme::Psp),
            "fsb" => Ok(CodebookScheme::Fsb),
            "exhaustive" => Ok(CodebookScheme::Exhaustive),
            other => Err(Error::Config(format!("unknown codebook scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchCodebook {
    pub scheme: CodebookScheme,
    pub patterns: Vec<OrderingPattern>,
}

impl BranchCodebook {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn single(n: usize) -> Self {
        Self {
            scheme: CodebookScheme::Single,
            patterns: vec![OrderingPattern::identity(n)],
        }
    }

    /// Every permutation of `0..n`, lexicographic, identity first.
    pub fn exhaustive(n: usize) -> Result<Self> {
        Ok(Self {
            scheme: CodebookScheme::Exhaustive,
            patterns: from_perms(all_permutations(n))?,
        })
    }

    fn from_scheme_perms(scheme: CodebookScheme, perms: Vec<Vec<usize>>) -> Result<Self> {
        let patterns = from_perms(perms)?;
        for (i, p) in patterns.iter().enumerate() {
            if patterns[..i].iter().any(|q| q.perm == p.perm) {
                return Err(Error::contract(format!(
                    "codebook repeats the ordering {:?}",
                    p.perm
                )));
            }
        }
        Ok(Self { scheme, patterns })
    }
}

fn from_perms(perms: Vec<Vec<usize>>) -> Result<Vec<OrderingPattern>> {
    perms
        .into_iter()
        .enumerate()
        .map(|(i, p)| OrderingPattern::new(i, p))
        .collect()
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Next permutation in lexicographic order; false after the last one.
fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = vec![p.clone()];
    while next_permutation(&mut p) {
        out.push(p.clone());
    }
    out
}

/// Identity on the first `s` positions, reversal on the rest.
fn shifted_reversal(n: usize, s: usize) -> Vec<usize> {
    (0..s).chain((s..n).rev()).collect()
}

/// Pre-stored shifted-reversal patterns.
///
/// Pattern 0 is the identity; pattern `j >= 1` keeps the first
/// `s = floor((j - 1) n / L) mod n` positions and reverses the rest. Past
/// `n` branches the shift repeats, and a repeated pattern is replaced by the
/// lexicographically first unused permutation.
pub fn psp_codebook(n: usize, l: usize) -> Result<BranchCodebook> {
    if n == 0 || l == 0 || l > factorial(n) {
        return Err(Error::contract(format!(
            "PSP needs 1 <= L <= n! (n = {n}, L = {l})"
        )));
    }
    let mut perms: Vec<Vec<usize>> = vec![(0..n).collect()];
    let mut pool = all_permutations(n).into_iter();
    for j in 1..l {
        let s = ((j - 1) * n / l) % n;
        let mut cand = shifted_reversal(n, s);
        if perms.contains(&cand) {
            cand = pool
                .by_ref()
                .find(|p| !perms.contains(p))
                .expect("L <= n! leaves an unused permutation");
        }
        perms.push(cand);
    }
    BranchCodebook::from_scheme_perms(CodebookScheme::Psp, perms)
}

/// Header fields of a stored FSB codebook.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FsbMeta {
    pub n_s: usize,
    pub l: usize,
    pub n_e: usize,
    pub seed: u64,
}

/// Frequently-selected-branches codebook from `n_e` training experiments.
///
/// `winner(e, exhaustive)` runs experiment `e` against the full
/// permutation codebook and returns the winning index. The `l` most
/// frequent winners are kept, most frequent first, ties to the lower index.
pub fn fsb_train<F>(n: usize, l: usize, n_e: usize, mut winner: F) -> Result<BranchCodebook>
where
    F: FnMut(usize, &BranchCodebook) -> Result<usize>,
{
    let full = BranchCodebook::exhaustive(n)?;
    if l == 0 || l > full.len() || n_e == 0 {
        return Err(Error::contract(format!(
            "FSB needs 1 <= L <= n! and at least one experiment (L = {l}, n_e = {n_e})"
        )));
    }
    let mut hist = vec![0usize; full.len()];
    for e in 0..n_e {
        let w = winner(e, &full)?;
        if w >= hist.len() {
            return Err(Error::contract(format!("winner index {w} out of range")));
        }
        hist[w] += 1;
    }
    fsb_from_histogram(&full, &hist, l)
}

pub fn fsb_from_histogram(
    full: &BranchCodebook,
    hist: &[usize],
    l: usize,
) -> Result<BranchCodebook> {
    let mut order: Vec<usize> = (0..hist.len()).collect();
    order.sort_by(|&a, &b| hist[b].cmp(&hist[a]).then(a.cmp(&b)));
    let perms = order[..l]
        .iter()
        .map(|&i| full.patterns[i].perm.clone())
        .collect();
    BranchCodebook::from_scheme_perms(CodebookScheme::Fsb, perms)
}

pub fn write_fsb(path: &Path, meta: &FsbMeta, codebook: &BranchCodebook) -> Result<()> {
    let mut text = format!(
        "fsb n_s={} L={} n_e={} seed={}\n",
        meta.n_s, meta.l, meta.n_e, meta.seed
    );
    for p in &codebook.patterns {
        let line: Vec<String> = p.perm.iter().map(|i| i.to_string()).collect();
        text.push_str(&line.join(" "));
        text.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_fsb(path: &Path) -> Result<(FsbMeta, BranchCodebook)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("fsb") {
        return Err(parse_err(1, "header must start with 'fsb'".into()));
    }
    let mut meta = FsbMeta {
        n_s: 0,
        l: 0,
        n_e: 0,
        seed: 0,
    };
    let mut seen = 0;
    for f in fields {
        let (k, v) = f
            .split_once('=')
            .ok_or_else(|| parse_err(1, format!("malformed header field '{f}'")))?;
        let num: u64 = v
            .parse()
            .map_err(|_| parse_err(1, format!("non-integer value in '{f}'")))?;
        match k {
            "n_s" => meta.n_s = num as usize,
            "L" => meta.l = num as usize,
            "n_e" => meta.n_e = num as usize,
            "seed" => meta.seed = num,
            _ => return Err(parse_err(1, format!("unknown header field '{k}'"))),
        }
        seen += 1;
    }
    if seen != 4 {
        return Err(parse_err(1, "header needs n_s, L, n_e and seed".into()));
    }
    let mut perms = Vec::new();
    for (i, line) in lines {
        let perm: std::result::Result<Vec<usize>, _> =
            line.split_whitespace().map(str::parse).collect();
        let perm = perm.map_err(|_| parse_err(i + 1, "non-integer index".into()))?;
        if perm.len() != meta.n_s {
            return Err(parse_err(
                i + 1,
                format!("expected {} indices, found {}", meta.n_s, perm.len()),
            ));
        }
        perms.push(perm);
    }
    if perms.len() != meta.l {
        return Err(parse_err(
            1,
            format!(
                "header says L={} but {} patterns follow",
                meta.l,
                perms.len()
            ),
        ));
    }
    let cb = BranchCodebook::from_scheme_perms(CodebookScheme::Fsb, perms)
        .map_err(|e| parse_err(1, e.to_string()))?;
    Ok((meta, cb))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub l_opt: usize,
    pub distances: Vec<f64>,
    pub feedforward_bits: u32,
}

/// `ceil(log2 L)`, zero for a single branch.
pub fn feedforward_bits(l: usize) -> u32 {
    if l <= 1 {
        0
    } else {
        usize::BITS - (l - 1).leading_zeros()
    }
}

/// Branch index as `bits` bits, most significant first.
pub fn encode_index(index: usize, bits: u32) -> Vec<u8> {
    (0..bits).rev().map(|b| ((index >> b) & 1) as u8).collect()
}

pub fn decode_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
}

/// Payload share `N_d K log2(m) / (N_d K log2(m) + B)` as an exact fraction.
pub fn feedforward_efficiency_ratio(n_d: u64, k: u64, m: u64, b: u64) -> (u64, u64) {
    let payload = n_d * k * u64::from(m.trailing_zeros());
    (payload, payload + b)
}

pub fn feedforward_efficiency(n_d: u64, k: u64, m: u64, b: u64) -> f64 {
    let (num, den) = feedforward_efficiency_ratio(n_d, k, m, b);
    num as f64 / den as f64
}

/// Noise-free squared distance of one branch over a block of symbol vectors.
///
/// Each vector is precoded with the branch's ordering and feedback, passed
/// through `W T Hbar_rd F_r Hbar_sr F_s`, folded by the modulo and put back
/// in the original order before comparing with the data.
pub fn branch_distance(
    design: &BranchDesign,
    block: &[Vec<Complex64>],
    hbar_sr: &CMatrix,
    hbar_rd: &CMatrix,
    constellation: &QamConstellation,
) -> Result<f64> {
    let m = constellation.order();
    let pat = &design.pattern;
    let cascade = &design.w * pat.apply_rows(hbar_rd) * &design.f_r * hbar_sr * &design.f_s;
    let mut total = 0.0;
    for s in block {
        let enc = thp_encode(s, pat, &design.u, m)?;
        let y: CVector = &cascade * &enc.xbar;
        let folded: Vec<Complex64> = y.iter().map(|&v| mod_m(v, m)).collect();
        let back = pat.restore(&folded);
        total += s
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>();
    }
    Ok(total)
}

/// Picks the branch with the smallest noise-free distance; ties go to the
/// lowest index.
pub fn select_branch(
    designs: &[BranchDesign],
    block: &[Vec<Complex64>],
    hbar_sr: &CMatrix,
    hbar_rd: &CMatrix,
    constellation: &QamConstellation,
) -> Result<SelectionOutcome> {
    if designs.is_empty() {
        return Err(Error::contract("no branches to select from"));
    }
    let distances = designs
        .iter()
        .map(|d| branch_distance(d, block, hbar_sr, hbar_rd, constellation))
        .collect::<Result<Vec<f64>>>()?;
    let l_opt = argmin(&distances);
    Ok(SelectionOutcome {
        l_opt,
        distances,
        feedforward_bits: feedforward_bits(designs.len()),
    })
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &d) in v.iter().enumerate().skip(1) {
        if d < v[best] {
            best = i;
        }
    }
    best
}
