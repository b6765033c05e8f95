//! Seed derivation. Every random draw in the pipeline comes from a
//! ChaCha stream whose seed is derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Stable sub-seed for a named stage of a run.
pub fn derive_seed(master: u64, stage: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(stage.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Sub-seed for item `index` within a stage.
pub fn derive_indexed(master: u64, stage: &str, index: u64) -> u64 {
    derive_seed(master, &format!("{stage}#{index}"))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
