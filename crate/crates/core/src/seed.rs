//! Run-seed fan-out.
//!
//! A run carries one `u64` seed. Each stage draws its generator from
//! `derive(run_seed, stage)`: the first eight bytes (little-endian) of
//! `SHA-256(run_seed as 8 LE bytes || stage as UTF-8)`. Re-running a single
//! stage with the same run seed therefore reproduces its randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const BASE: &str = "base";
pub const BANDWIDTH: &str = "bandwidth";
pub const EMBED: &str = "embed";
pub const LSH: &str = "lsh";
pub const SPLIT: &str = "split";

pub fn derive(run_seed: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(stage.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stage_rng(run_seed: u64, stage: &str) -> ChaCha8Rng {
    rng(derive(run_seed, stage))
}
