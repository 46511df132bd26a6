//! Robust multi-branch Tomlinson-Harashima precoding for two-hop
//! amplify-and-forward MIMO relay links with imperfect channel knowledge.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: complex SVD/EVD wrappers, inverse square roots, permutation
//!   matrices and the geometric mean decomposition.
//! * [`channel`]: Kronecker-correlated channel statistics and sampling of
//!   estimated channels plus estimation errors.
//! * [`thp`]: square QAM, the modulo operator, THP encoding and detection.
//! * [`design`]: per-branch robust transceiver synthesis (whitening,
//!   alternating water-filling, GMD, MMSE receiver, MSE evaluation).
//! * [`multibranch`]: ordering codebooks, branch selection, feedforward cost.
//! * [`harness`]: Monte-Carlo link simulation, baselines, sweeps and output.

pub mod channel;
pub mod design;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod multibranch;
pub mod rng;
pub mod thp;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
