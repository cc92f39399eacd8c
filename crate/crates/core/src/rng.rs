use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mixes a phase tag into the run seed (FNV-1a over the tag) so that each
/// stage of a run draws from an independent, reproducible stream.
///
/// Stable across platforms and Rust versions, unlike `DefaultHasher`.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.rotate_left(17)
}

/// Seeded generator for one named phase of a run.
pub fn seeded(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}
