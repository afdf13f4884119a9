//! Seed plumbing. Every random stream in the crate is a ChaCha8 generator
//! derived from a master seed and a purpose tag, so independent stages never
//! share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_SCENARIO: u64 = 0x5343_454e;
pub const TAG_INIT: u64 = 0x494e_4954;
pub const TAG_EVAL: u64 = 0x4556_414c;

/// splitmix64 finaliser.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, tag: u64) -> u64 {
    mix(master ^ mix(tag))
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent sub-stream `index` of `seed`; used for per-trial generators.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
