//! Named, hashed random sub-streams derived from one master seed.
//!
//! Every consumer of randomness asks for a stream by label, e.g.
//! `population`, `round.3.client.7` or `round.3.solution.12.client.7`.
//! The stream seed is `SHA-256(master_seed as u64 big-endian || label)`
//! and the generator is ChaCha8. Because each stream depends only on the
//! master seed and its label, work can be distributed across threads in
//! any order without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self, label: &str) -> Stream {
        let mut hasher = Sha256::new();
        hasher.update(self.master.to_be_bytes());
        hasher.update(label.as_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }

    pub fn client_stream(&self, round: usize, client: usize) -> Stream {
        self.stream(&format!("round.{round}.client.{client}"))
    }

    pub fn solution_client_stream(&self, round: usize, solution: u64, client: usize) -> Stream {
        self.stream(&format!("round.{round}.solution.{solution}.client.{client}"))
    }
}
