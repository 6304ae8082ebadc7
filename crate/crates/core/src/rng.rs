//! Seeded random streams.
//!
//! Every stochastic operation draws from a [`ChaCha8Rng`], a counter-based
//! generator whose output is specified bit-for-bit and identical on every
//! platform. Independent streams are derived from a root seed and a purpose
//! string with [`derive_seed`], so the order in which streams are created
//! never affects their contents.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a stream seed from `(seed, purpose, indices)`.
///
/// The purpose string is FNV-1a hashed, then the seed and each index are
/// folded in through the SplitMix64 finalizer.
pub fn derive_seed(seed: u64, purpose: &str, indices: &[u64]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in purpose.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    let mut state = splitmix64(h ^ splitmix64(seed));
    for &i in indices {
        state = splitmix64(state ^ splitmix64(i.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    state
}

pub fn stream(seed: u64, purpose: &str, indices: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, purpose, indices))
}
