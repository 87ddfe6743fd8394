//! Hierarchical seeding: every random stream is keyed by a path of integers
//! (seed, experiment, qubit, entry, ...) so that adding work never perturbs
//! the draws of existing work, regardless of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a key path into a single 64-bit seed.
pub fn derive_seed(path: &[u64]) -> u64 {
    path.iter()
        .fold(0x6A09_E667_F3BC_C908u64, |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Deterministic generator for a key path.
pub fn rng_for(path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(path))
}
