//! Seed plumbing.
//!
//! Every stochastic component owns a `ChaCha8Rng` seeded from a 64-bit value.
//! Sub-seeds are derived from a parent seed and a stream tag with a
//! SplitMix64 finalizer, so each component can be reproduced on its own
//! without replaying the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed for stream `tag`, element `index`.
pub fn derive_seed(parent: u64, tag: &str, index: u64) -> u64 {
    // FNV-1a over the tag keeps streams with different names apart.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(splitmix64(parent ^ h).wrapping_add(index))
}

/// Named seed streams used by the experiment harness. All of them hang off
/// the single scenario seed.
pub mod stream {
    pub const SPLIT: &str = "split";
    pub const PARTITION: &str = "partition";
    pub const DATA: &str = "data";
    pub const PROTOCOL: &str = "protocol";
    pub const CLIENT_TRAIN: &str = "client-train";
    pub const CLIENT_INIT: &str = "client-init";
    pub const ATTACK: &str = "attack";
}
