//! Named, seed-derived random streams.
//!
//! Every stochastic step draws from a ChaCha stream keyed by the run seed and a
//! stream name, with an optional integer lane (patient index, trial index, ...).
//! Streams with different names or lanes never overlap, so work can be sharded
//! without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `(seed, name, lane)`.
pub fn substream(seed: u64, name: &str, lane: u64) -> StreamRng {
    let tag = fnv1a(name.as_bytes());
    let mut key = [0u8; 32];
    let mut state = seed ^ tag.rotate_left(17);
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(lane);
    rng
}

/// Stream for `(seed, name)` on lane 0.
pub fn stream(seed: u64, name: &str) -> StreamRng {
    substream(seed, name, 0)
}

/// Derive a child seed (for handing a whole sub-run its own seed).
pub fn derive_seed(seed: u64, name: &str, lane: u64) -> u64 {
    splitmix(seed ^ fnv1a(name.as_bytes()) ^ splitmix(lane))
}

/// FNV-1a digest of a sequence of floats, by bit pattern.
pub fn digest_f64<'a>(values: impl IntoIterator<Item = &'a f64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
