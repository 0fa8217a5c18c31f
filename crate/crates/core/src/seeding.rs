//! Deterministic random substreams.
//!
//! Every consumer of randomness (a channel link of a drop, a GA slot of a
//! generation, a random IRS draw) gets its own ChaCha stream keyed by a tuple
//! of integers, so results never depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels used to separate independent consumers of one drop seed.
pub mod label {
    pub const CHANNEL: u64 = 1;
    pub const GA_HYBRID: u64 = 2;
    pub const GA_IRS_ONLY: u64 = 3;
    pub const RANDOM_IRS_HYBRID: u64 = 4;
    pub const RANDOM_IRS_SINGLE: u64 = 5;
    pub const DROP: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a tuple of integers into one 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Random stream keyed by `parts`.
pub fn substream(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}
