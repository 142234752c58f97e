//! Seed-stream derivation.
//!
//! A single master seed drives four independent named streams: `data-gen`,
//! `shuffle`, `init`, and `dp-noise`. Each stream seeds its own ChaCha12
//! generator with `SHA-256(master_seed_le_bytes || stream_name)`, so changing
//! one concern (say, the noise multiplier, which consumes `dp-noise`) never
//! perturbs the dataset, the shuffle order, or the parameter initialization.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub const STREAM_DATA: &str = "data-gen";
pub const STREAM_SHUFFLE: &str = "shuffle";
pub const STREAM_INIT: &str = "init";
pub const STREAM_NOISE: &str = "dp-noise";

fn digest(master_seed: u64, stream: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update(stream.as_bytes());
    hasher.finalize().into()
}

/// Generator for the given named stream.
pub fn stream_rng(master_seed: u64, stream: &str) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(digest(master_seed, stream))
}

/// 64-bit sub-seed for APIs that take a plain seed (the data generators).
pub fn stream_seed(master_seed: u64, stream: &str) -> u64 {
    let d = digest(master_seed, stream);
    u64::from_le_bytes(d[..8].try_into().unwrap())
}
