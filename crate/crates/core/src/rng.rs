//! Deterministic, splittable random streams.
//!
//! Every stream is a ChaCha8 keystream: the key is expanded from the master
//! seed and the 64-bit stream id selects one of 2^64 independent keystreams.
//! Child streams are addressed by hashing the parent id together with a
//! child index, so a trial's randomness depends only on its coordinates and
//! never on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Finalizer of SplitMix64; a bijection on u64 with full avalanche.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngSeed {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Address of the `child`-th sub-stream of this stream.
    pub fn derive(&self, child: u64) -> Self {
        let parent = mix64(self.stream_index.wrapping_add(GOLDEN));
        let child = mix64(child.wrapping_mul(GOLDEN) ^ 0x6a09_e667_f3bc_c909);
        Self {
            master_seed: self.master_seed,
            stream_index: mix64(parent ^ child.rotate_left(23)),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = self.master_seed;
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(GOLDEN);
            chunk.copy_from_slice(&mix64(state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_index);
        rng
    }
}
