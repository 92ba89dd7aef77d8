//! Counter-keyed random substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! base seed and a path of indices (replicate, record, ...). A replicate's
//! stream depends only on its key, so serial and parallel runs produce
//! bit-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for the substream identified by `seed` and `path`.
pub fn substream(seed: u64, path: &[u64]) -> StreamRng {
    let mut key = mix64(seed);
    for &p in path {
        key = mix64(key ^ mix64(p.wrapping_add(0xD134_2543_DE82_EF95)));
    }
    let mut bytes = [0u8; 32];
    let mut state = key;
    for chunk in bytes.chunks_mut(8) {
        state = mix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}
