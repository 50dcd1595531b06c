//! Replication seeds.
//!
//! A replication's seed is the first 8 bytes (little endian) of
//! `SHA-256("{base}|{instance_id}|{algo}|{index}")`. Adding an algorithm or an
//! instance never shifts the streams of existing replications. The environment
//! draws from ChaCha8 stream 0 of that seed and the learner from stream 1.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn replication_seed(base: u64, instance_id: &str, algo: &str, index: u64) -> u64 {
    let digest = Sha256::digest(format!("{base}|{instance_id}|{algo}|{index}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// `(environment, learner)` generators for a replication seed.
pub fn streams(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut env = ChaCha8Rng::seed_from_u64(seed);
    env.set_stream(0);
    let mut learner = ChaCha8Rng::seed_from_u64(seed);
    learner.set_stream(1);
    (env, learner)
}
