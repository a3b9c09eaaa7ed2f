//! Counter-based random substreams.
//!
//! Every random quantity in a run is drawn from a substream addressed by
//! `(root seed, name, indices...)`. The address is folded into a 256-bit
//! ChaCha8 key:
//!
//! 1. `h = splitmix64(seed)`
//! 2. `h = splitmix64(h ^ fnv1a64(name))`
//! 3. for each index `i`: `h = splitmix64(h ^ splitmix64(i))`
//! 4. the key is `splitmix64` applied four times in sequence starting at `h`.
//!
//! Substreams never share state, so the order in which they are consumed does
//! not matter and any one of them can be regenerated on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Root of all substreams for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    seed: u64,
}

pub const CORPUS: &str = "corpus";
pub const DETECT: &str = "detect";
pub const DETECT_FP: &str = "detect-fp";

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn key(&self, name: &str, indices: &[u64]) -> u64 {
        let mut h = splitmix64(self.seed);
        h = splitmix64(h ^ fnv1a64(name.as_bytes()));
        for &i in indices {
            h = splitmix64(h ^ splitmix64(i));
        }
        h
    }

    pub fn stream(&self, name: &str, indices: &[u64]) -> ChaCha8Rng {
        let mut h = self.key(name, indices);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            h = splitmix64(h);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}
