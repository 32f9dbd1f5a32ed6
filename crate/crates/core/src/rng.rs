//! Named random sub-streams derived from one user seed.
//!
//! Every consumer of randomness (splitting, resampling, initialization,
//! dropout, explanation sampling) draws from its own stream so that changing
//! how one component uses randomness never shifts another component's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream keyed by name.
    pub fn derive(&self, name: &str) -> SeedStream {
        SeedStream {
            seed: mix(self.seed ^ fnv1a(name.as_bytes())),
        }
    }

    /// Child stream keyed by an integer (step, fold, example index...).
    pub fn index(&self, i: u64) -> SeedStream {
        SeedStream {
            seed: mix(self.seed.wrapping_add(mix(i.wrapping_add(0x9e37_79b9_7f4a_7c15)))),
        }
    }

    pub fn rng(&self) -> Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
