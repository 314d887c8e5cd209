//! Seeded random streams.
//!
//! Every random decision (per-class sampling, k-means restarts, splits) draws
//! from its own ChaCha8 stream whose seed is derived from the user seed and a
//! tag, so streams never depend on the order in which they are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// FNV-1a over `seed` (little-endian) followed by `tag`, finished with a
/// SplitMix64 avalanche.
pub fn derive_seed(seed: u64, tag: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in seed.to_le_bytes().iter().chain(tag) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, tag: &[u8]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, tag))
}

pub fn stream_indexed(seed: u64, domain: &str, index: u64) -> Rng {
    let mut tag = domain.as_bytes().to_vec();
    tag.push(0);
    tag.extend_from_slice(&index.to_le_bytes());
    stream(seed, &tag)
}
