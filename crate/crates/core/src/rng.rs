//! Reproducible, splittable random streams.
//!
//! A [`Stream`] is a 64-bit key. Children are derived by mixing the parent
//! key with a label, so the stream used by replication `r` of cell `(case, n)`
//! depends only on that path and never on how many draws other streams made.
//! Each key seeds a ChaCha generator, which is itself counter based, so the
//! sequence for a given path is identical on every platform and thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

/// Stage labels, kept distinct so that adding a stage never perturbs another.
pub mod stage {
    pub const DATA: u64 = 0x6461_7461;
    pub const FOLDS: u64 = 0x666f_6c64;
    pub const TRUTH: u64 = 0x7472_7574;
    pub const BOOTSTRAP: u64 = 0x626f_6f74;
    pub const LASSO_CV: u64 = 0x6c63_7620;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stream {
    key: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream {
            key: splitmix(seed ^ 0x9e37_79b9_7f4a_7c15),
        }
    }

    pub fn child(&self, label: u64) -> Self {
        Stream {
            key: splitmix(self.key ^ splitmix(label.wrapping_add(0x632b_e59b_d9b4_e019))),
        }
    }

    /// Convenience for a chain of labels.
    pub fn path(&self, labels: &[u64]) -> Self {
        labels.iter().fold(*self, |s, &l| s.child(l))
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn rng(&self) -> StreamRng {
        let mut seed = [0u8; 32];
        let mut state = self.key;
        for chunk in seed.chunks_exact_mut(8) {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            chunk.copy_from_slice(&splitmix(state).to_le_bytes());
        }
        ChaCha12Rng::from_seed(seed)
    }
}

// SplitMix64 finalizer.
fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform shuffle of `0..n` driven by `rng` (Fisher-Yates).
pub fn shuffled_indices(n: usize, rng: &mut StreamRng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}
