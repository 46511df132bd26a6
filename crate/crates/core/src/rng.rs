//! Deterministic random substreams.
//!
//! Every random quantity in a simulation is drawn from a ChaCha stream keyed
//! by `(seed, trial index)` and selected by a [`Stream`] id, so a trial draws
//! the same channel, data and noise no matter which scheme runs it or which
//! worker thread picks it up.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Channel = 1,
    Data = 2,
    Noise = 3,
    SideInfo = 4,
    Training = 5,
    Mse = 6,
}

pub fn substream(seed: u64, trial: u64, stream: Stream) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream as u64);
    rng
}

/// Circularly symmetric complex Gaussian with unit variance
/// (real and imaginary parts each `N(0, 1/2)`).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
