//! Seeded, purpose-separated random streams.
//!
//! A run has one global seed. Each consumer (data synthesis, initialisation,
//! latent sampling, ...) draws from its own ChaCha stream keyed by
//! `(seed, purpose)` and indexed by a consumer-chosen number (a trial index, an
//! epoch, an example id). Reordering one consumer never perturbs another.

use alloc::vec::Vec;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Synthesis = 1,
    Noise = 2,
    Init = 3,
    Sampling = 4,
    Shuffle = 5,
    Validation = 6,
    Simulation = 7,
    Projection = 8,
    Split = 9,
    Subsample = 10,
}

/// Independent stream for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> StreamRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    key[16..24].copy_from_slice(b"latentsg");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

pub fn normal_vec(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}
