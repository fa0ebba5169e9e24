//! Seed derivation.
//!
//! Every random stream in a run is derived from one master seed with
//! [`derive`], a SplitMix64 mix of `(parent, stream tag)`. Streams for
//! different tags are statistically independent, and the mapping is stable
//! across platforms and releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_STREAM: u64 = 0x5354_5245_414d;
pub const TAG_MODEL: u64 = 0x4d_4f44_454c;
pub const TAG_SELECT: u64 = 0x5345_4c45_4354;
pub const TAG_TRAIN: u64 = 0x54_5241_494e;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `tag` under `parent`.
pub fn derive(parent: u64, tag: u64) -> u64 {
    splitmix64(parent ^ splitmix64(tag))
}

/// Seed of replica `index` of an experiment with master seed `master`.
pub fn replica(master: u64, index: usize) -> u64 {
    derive(master, index as u64)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
