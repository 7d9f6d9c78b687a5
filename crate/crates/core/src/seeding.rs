//! Deterministic RNG stream derivation.
//!
//! Every random choice in the pipeline draws from a ChaCha stream derived
//! from the run seed plus the identity of the work item (function, iteration,
//! sample index, worker index), so reruns reproduce byte-identical output
//! regardless of scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Fold a sequence of u64 parts into one stream key.
pub(crate) fn mix(parts: &[u64]) -> u64 {
    let mut hash = FNV_OFFSET;
    for part in parts {
        for b in part.to_le_bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(FNV_PRIME);
        }
    }
    hash
}

pub(crate) fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(parts))
}
