//! Counter-based random streams.
//!
//! Every draw is addressed by a key of integers (trial, generation, index,
//! draw kind, ...). The key selects a ChaCha stream under the experiment seed,
//! so draws do not depend on evaluation order or on the number of workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Kinds of draws, used as the last key component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum DrawKind {
    Tag = 1,
    Child = 2,
    PseudoT = 3,
    PseudoU = 4,
    Covering = 5,
    Probe = 6,
    Fixture = 7,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seed(pub u64);

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream_id(key: &[u64]) -> u64 {
    key.iter().fold(0x6a09_e667_f3bc_c908, |h, &w| mix(h ^ mix(w)))
}

impl Seed {
    /// Generator for the stream addressed by `key`.
    pub fn rng(self, key: &[u64]) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream_id(key));
        rng
    }

    /// A single uniform draw on `[0, 1)`.
    pub fn uniform(self, key: &[u64]) -> f64 {
        self.rng(key).gen::<f64>()
    }

    /// A single uniform draw from `0..n`.
    pub fn below(self, key: &[u64], n: usize) -> usize {
        self.rng(key).gen_range(0..n)
    }

    /// Derived seed, used to hand an independent sub-experiment its own seed.
    pub fn derive(self, key: &[u64]) -> Seed {
        Seed(mix(self.0 ^ stream_id(key)))
    }
}

/// Encodes a possibly negative generation index as a key word.
pub fn gen_word(k: i32) -> u64 {
    k as i64 as u64
}
