//! Counter-based splittable random streams.
//!
//! Monte-Carlo work parallelizes over (run, player) or over heuristic
//! restarts. Each unit of work gets its own generator derived from the
//! user seed and its coordinates, so results are bit-identical no matter
//! how the work is scheduled, and nested budgets (more restarts, more
//! runs) extend earlier ones instead of reshuffling them.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 step; the standard 64-bit finalizer.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent generator from a root seed and stream coordinates.
///
/// The coordinates are hashed into a 256-bit ChaCha key, so streams for
/// different `(seed, tags)` pairs are statistically independent and the
/// derivation is order-sensitive: `[1, 2]` and `[2, 1]` differ.
pub fn stream(seed: u64, tags: &[u64]) -> ChaCha12Rng {
    let mut state = seed ^ 0x6c62_272e_07bb_0142;
    state = splitmix64(&mut state);
    for tag in tags {
        state ^= tag.wrapping_mul(0xff51_afd7_ed55_8ccd);
        state = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}
