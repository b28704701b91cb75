//! Deterministic seed derivation.
//!
//! Every stochastic stage (cohort generation, fold planning, each model's
//! training) gets its own ChaCha stream seeded through this one function, so
//! adding subjects or reordering folds never shifts anyone else's draws.

/// SplitMix64 finalizer: a bijective avalanche mix of the input.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent seed for stream `stream` from a master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}
