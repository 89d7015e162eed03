//! Seed derivation and the generator type shared by every stochastic routine.

use rand::SeedableRng;

/// All randomized routines draw from this generator so results are
/// reproducible across platforms.
pub type StdRng = rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one seed. Order-sensitive.
pub fn derive(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5EED_0000_0000_0000, |acc, &p| mix64(acc ^ mix64(p)))
}
