//! Seed plumbing: every source of randomness in the workspace is derived from
//! a single user seed through named sub-streams, so that individual stages can
//! be reproduced in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a, used to fold stream names into seeds. Stable across platforms and
/// releases, unlike `DefaultHasher`.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 step; cheap deterministic mixing for per-item seeds.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix several values into one seed.
pub fn mix(parts: &[u64]) -> u64 {
    let mut acc = 0x2545_f491_4f6c_dd1d_u64;
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}

/// A named random sub-stream of `seed`.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(&[seed, fnv1a(name.as_bytes())]))
}
