//! Deterministic seed derivation.
//!
//! Stage and per-scenario random streams are derived from the master
//! seed and a stable label, so adding scenarios never perturbs the
//! streams of existing ones. The mix is FNV-1a over the master seed
//! bytes and the label; it is fixed here and must never change, or
//! recorded runs stop being reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Derives a child seed from `(master, label)`.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut hash = FNV_OFFSET;
    for byte in master.to_le_bytes().into_iter().chain(label.bytes()) {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Seeded random stream for one stage or scenario.
pub fn stream(master: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, label))
}
