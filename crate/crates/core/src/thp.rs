//! Square QAM, the modulo operator, THP encoding and destination detection.
//!
//! Constellation points use the unnormalized odd-integer grid, so
//! `sigma_s2 = 2(m-1)/3` and the modulo region is `[-sqrt(m), sqrt(m))` per
//! real/imaginary component.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, CVector};
use crate::multibranch::OrderingPattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QamConstellation {
    m: usize,
    side: usize,
    bits_per_axis: usize,
}

impl QamConstellation {
    /// `m` must be an even power of two (4, 16, 64, ...).
    pub fn new(m: usize) -> Result<Self> {
        if m < 4 || !m.is_power_of_two() || !m.trailing_zeros().is_multiple_of(2) {
            return Err(Error::contract(format!(
                "square QAM order must be 4^k with k >= 1, got {m}"
            )));
        }
        let bits_per_axis = (m.trailing_zeros() / 2) as usize;
        Ok(Self {
            m,
            side: 1 << bits_per_axis,
            bits_per_axis,
        })
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis
    }

    pub fn sqrt_m(&self) -> f64 {
        self.side as f64
    }

    /// Average symbol energy of the odd-integer grid.
    pub fn sigma_s2(&self) -> f64 {
        2.0 * (self.m as f64 - 1.0) / 3.0
    }

    /// Per-axis amplitudes `-(sqrt(m)-1), ..., -1, 1, ..., sqrt(m)-1`.
    pub fn levels(&self) -> Vec<f64> {
        (0..self.side).map(|i| self.level(i)).collect()
    }

    fn level(&self, index: usize) -> f64 {
        (2 * index) as f64 - (self.side - 1) as f64
    }

    /// Nearest level index for one axis; values beyond the outer points clamp.
    fn nearest_index(&self, x: f64) -> usize {
        let idx = ((x + (self.side - 1) as f64) / 2.0).round();
        idx.clamp(0.0, (self.side - 1) as f64) as usize
    }

    fn axis_bits(&self, index: usize, out: &mut Vec<u8>) {
        let gray = index ^ (index >> 1);
        for b in (0..self.bits_per_axis).rev() {
            out.push(((gray >> b) & 1) as u8);
        }
    }

    fn axis_index(&self, bits: &[u8]) -> usize {
        let mut gray = 0usize;
        for &b in bits {
            gray = (gray << 1) | (b & 1) as usize;
        }
        let mut index = gray;
        let mut shift = gray >> 1;
        while shift != 0 {
            index ^= shift;
            shift >>= 1;
        }
        index
    }

    /// Gray-mapped symbols. The first half of each symbol's bits selects the
    /// in-phase level, the second half the quadrature level, most
    /// significant bit first.
    pub fn map(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        let bps = self.bits_per_symbol();
        if !bits.len().is_multiple_of(bps) {
            return Err(Error::contract(format!(
                "bit count {} is not a multiple of {bps}",
                bits.len()
            )));
        }
        Ok(bits
            .chunks_exact(bps)
            .map(|chunk| {
                let (re, im) = chunk.split_at(self.bits_per_axis);
                c64(
                    self.level(self.axis_index(re)),
                    self.level(self.axis_index(im)),
                )
            })
            .collect())
    }

    /// Hard decision to the nearest point, then Gray demapping.
    pub fn demap(&self, symbols: &[Complex64]) -> Vec<u8> {
        let mut bits = Vec::with_capacity(symbols.len() * self.bits_per_symbol());
        for s in symbols {
            self.axis_bits(self.nearest_index(s.re), &mut bits);
            self.axis_bits(self.nearest_index(s.im), &mut bits);
        }
        bits
    }

    /// Nearest constellation point per component.
    pub fn quantize(&self, x: Complex64) -> Complex64 {
        c64(
            self.level(self.nearest_index(x.re)),
            self.level(self.nearest_index(x.im)),
        )
    }
}

pub fn qam_map(c: &QamConstellation, bits: &[u8]) -> Result<Vec<Complex64>> {
    c.map(bits)
}

pub fn qam_demap(c: &QamConstellation, symbols: &[Complex64]) -> Vec<u8> {
    c.demap(symbols)
}

/// Reduces `x` into `[-a, a)` and returns the integer `k` with
/// `result = x - 2 a k`. Values already inside the region are returned
/// unchanged, so the map is exactly idempotent.
fn reduce(x: f64, a: f64) -> (f64, f64) {
    if (-a..a).contains(&x) {
        return (x, 0.0);
    }
    let mut k = ((x + a) / (2.0 * a)).floor();
    let mut r = x - 2.0 * a * k;
    // Rounding can land exactly on an edge.
    if r >= a {
        r -= 2.0 * a;
        k += 1.0;
    } else if r < -a {
        r += 2.0 * a;
        k -= 1.0;
    }
    (r, k)
}

/// `MOD_m(x) = x - 2 sqrt(m) floor((x + sqrt(m)) / (2 sqrt(m)))` per component.
pub fn mod_m(x: Complex64, m: usize) -> Complex64 {
    let a = (m as f64).sqrt();
    c64(reduce(x.re, a).0, reduce(x.im, a).0)
}

/// The modulo result together with the offset it added (`result = x + offset`).
fn mod_with_offset(x: Complex64, a: f64) -> (Complex64, Complex64) {
    let (re, kr) = reduce(x.re, a);
    let (im, ki) = reduce(x.im, a);
    (c64(re, im), c64(-2.0 * a * kr, -2.0 * a * ki))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThpEncoding {
    /// Channel symbols, each component inside the modulo region.
    pub xbar: CVector,
    /// Modulo offsets, integer multiples of `2 sqrt(m)` per component.
    pub e: CVector,
    /// Effective data `v = T s + e`, with `U xbar = v`.
    pub v: CVector,
}

fn check_unit_lower(u: &CMatrix) -> Result<()> {
    let n = u.nrows();
    if u.ncols() != n {
        return Err(Error::contract("feedback matrix must be square"));
    }
    for i in 0..n {
        if u[(i, i)] != c64(1.0, 0.0) {
            return Err(Error::contract(format!(
                "feedback matrix diagonal entry {i} is {}, expected 1",
                u[(i, i)]
            )));
        }
        for j in i + 1..n {
            if u[(i, j)] != c64(0.0, 0.0) {
                return Err(Error::contract("feedback matrix must be lower triangular"));
            }
        }
    }
    Ok(())
}

/// Successive precoding of `s` under ordering `t` and feedback `u = C + I`.
pub fn thp_encode(
    s: &[Complex64],
    t: &OrderingPattern,
    u: &CMatrix,
    m: usize,
) -> Result<ThpEncoding> {
    check_unit_lower(u)?;
    let n = u.nrows();
    if s.len() != n || t.perm.len() != n {
        return Err(Error::contract(format!(
            "symbol length {}, ordering size {} and feedback size {n} differ",
            s.len(),
            t.perm.len()
        )));
    }
    let a = (m as f64).sqrt();
    let mut xbar = CVector::zeros(n);
    let mut e = CVector::zeros(n);
    let mut v = CVector::zeros(n);
    for k in 0..n {
        let sbar = s[t.perm[k]];
        let mut acc = sbar;
        for j in 0..k {
            acc -= u[(k, j)] * xbar[j];
        }
        let (x, off) = mod_with_offset(acc, a);
        xbar[k] = x;
        e[k] = off;
        v[k] = sbar + off;
    }
    Ok(ThpEncoding { xbar, e, v })
}

/// `Q(MOD(T^T v_hat))`: undo the ordering, fold into the modulo region and
/// quantize each component to the constellation.
pub fn receiver_detect(
    v_hat: &CVector,
    t: &OrderingPattern,
    constellation: &QamConstellation,
) -> Vec<Complex64> {
    let m = constellation.order();
    let mut out = vec![c64(0.0, 0.0); v_hat.len()];
    for (i, &p) in t.perm.iter().enumerate() {
        out[p] = constellation.quantize(mod_m(v_hat[i], m));
    }
    out
}
