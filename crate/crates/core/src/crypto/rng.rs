use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use super::block::{Block, BLOCK_LEN};
use super::hash::h;

/// Deterministic source of every random value in a run.
///
/// The stream is ChaCha20 keyed by the 32-byte seed; `counter` is the number
/// of blocks drawn so far.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: [u8; 32],
    counter: u64,
    stream: ChaCha20Rng,
}

impl SeededRng {
    pub fn new(seed: [u8; 32]) -> Self {
        SeededRng {
            seed,
            counter: 0,
            stream: ChaCha20Rng::from_seed(seed),
        }
    }

    pub fn seed(&self) -> &[u8; 32] {
        &self.seed
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn next_block(&mut self) -> Block {
        let mut out = [0u8; BLOCK_LEN];
        self.stream.fill_bytes(&mut out);
        self.counter += 1;
        Block(out)
    }

    /// Independent stream whose seed is `SHA-256(seed || label)`.
    pub fn fork(&self, label: &[u8]) -> SeededRng {
        SeededRng::new(h(&[&self.seed, label]).0)
    }
}

impl PartialEq for SeededRng {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.counter == other.counter
    }
}

impl Eq for SeededRng {}

/// Draw the next block from `rng`.
pub fn rng_next_block(rng: &mut SeededRng) -> Block {
    rng.next_block()
}
