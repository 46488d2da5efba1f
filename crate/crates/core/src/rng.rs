//! Counter-based seeding: every `(root, path, step)` triple gets its own
//! generator, so paths can be drawn in any order on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit seed for one step of one path.
pub fn stream_seed(root: u64, path: u64, step: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(root) ^ path) ^ step)
}

/// Generator for one step of one path.
pub fn step_rng(root: u64, path: u64, step: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(root, path, step))
}
