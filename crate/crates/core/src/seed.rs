//! Hierarchical seed derivation.
//!
//! All randomness in a run flows from one root seed. Children are derived by
//! label (`root -> predicate -> repeat -> purpose`) so that adding a method or
//! a predicate never shifts the draws of another. Label children hash with
//! SHA-256; integer children use the SplitMix64 finalizer. Both are fixed
//! functions of their inputs, so seeds agree across platforms.
//!
//! Generators are ChaCha8 streams. Normal variates come from the ziggurat
//! sampler of `rand_distr::StandardNormal`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

impl Seed {
    pub fn child(self, label: &str) -> Seed {
        let mut hasher = Sha256::new();
        hasher.update(self.0.to_le_bytes());
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
        let digest = hasher.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        Seed(u64::from_le_bytes(bytes))
    }

    pub fn index(self, i: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(i.wrapping_add(0x5851_f42d_4c95_7f2d))))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Uniform value in `[0, 1)` from the top 53 bits.
    pub fn unit(self) -> f64 {
        (self.0 >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
