//! Deterministic sub-stream derivation from a single root seed.
//!
//! Every source of randomness in a run (weight init, batch shuffling,
//! negative draws, synthetic data) pulls from its own named stream so that
//! changing one component never perturbs the others.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche for seed mixing.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `(root, label, index)`.
pub fn derive(root: u64, label: &str, index: u64) -> u64 {
    let mut h = mix(root);
    for &b in label.as_bytes() {
        h = mix(h ^ u64::from(b));
    }
    mix(h ^ index)
}

/// A seeded RNG for the named sub-stream.
pub fn stream(root: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(root, label, index))
}
