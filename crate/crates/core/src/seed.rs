//! Labelled RNG streams.
//!
//! Every consumer of randomness draws from its own ChaCha stream whose key
//! is `SHA-256(master_seed || label path)`. Adding a new consumer never
//! shifts the draws seen by an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Root of a labelled stream tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedTree {
    key: [u8; 32],
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"aerobeam/seed/v1");
        h.update(master.to_le_bytes());
        SeedTree { key: h.finalize().into() }
    }

    /// Child node for `label`.
    pub fn child(&self, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        SeedTree { key: h.finalize().into() }
    }

    /// Child node for an integer index (episode, slot, ...).
    pub fn index(&self, i: u64) -> Self {
        self.child(&format!("#{i}"))
    }

    pub fn rng(&self) -> Rng {
        ChaCha8Rng::from_seed(self.key)
    }

    pub fn stream(&self, label: &str) -> Rng {
        self.child(label).rng()
    }
}
