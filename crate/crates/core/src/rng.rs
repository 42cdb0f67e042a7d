//! Hierarchical seed derivation.
//!
//! All randomness in a run descends from one root seed. A child seed is
//! `derive_seed(root, purpose, path)`: the purpose tag is folded in with
//! FNV-1a, every path index is mixed in with the SplitMix64 finalizer. The
//! resulting `u64` seeds a [`ChaCha8Rng`]. Two different purposes or paths
//! give statistically independent streams, and the mapping is stable across
//! platforms and releases.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, purpose: &str, path: &[u64]) -> u64 {
    let mut tag = FNV_OFFSET;
    for byte in purpose.bytes() {
        tag ^= u64::from(byte);
        tag = tag.wrapping_mul(FNV_PRIME);
    }
    let mut state = splitmix(root ^ tag);
    for &index in path {
        state = splitmix(state ^ splitmix(index));
    }
    state
}

pub fn rng_for(root: u64, purpose: &str, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, purpose, path))
}
