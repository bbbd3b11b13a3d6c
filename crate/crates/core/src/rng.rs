//! Seeded random streams.
//!
//! Every chain and every simulation replicate owns an independent ChaCha8
//! stream whose seed is derived from `(master seed, replicate, chain)`, so
//! results do not depend on scheduling or thread count.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as StreamRng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of stream `(replicate, chain)` under `master`.
pub fn derive_seed(master: u64, replicate: u64, chain: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ replicate.rotate_left(17));
    splitmix64(b ^ chain.rotate_left(41))
}

pub fn stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
