use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::split::Dataset;
use crate::error::{Error, Result};
use crate::numeric::Minibatch;

/// Seeded minibatch order over `0..n`.
///
/// Every epoch is a fresh permutation cut into consecutive batches; the last
/// batch of an epoch may be smaller.
#[derive(Debug, Clone)]
pub struct BatchStream {
    n: usize,
    batch_size: usize,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    pos: usize,
    epoch: usize,
}

impl BatchStream {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("cannot stream batches from an empty split"));
        }
        if batch_size == 0 {
            return Err(Error::config("batch size must be >= 1"));
        }
        let mut s = BatchStream {
            n,
            batch_size,
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: Vec::new(),
            pos: 0,
            epoch: 0,
        };
        s.reshuffle();
        Ok(s)
    }

    fn reshuffle(&mut self) {
        self.order = (0..self.n).collect();
        self.order.shuffle(&mut self.rng);
        self.pos = 0;
    }

    /// Number of completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.n.div_ceil(self.batch_size)
    }

    /// Next batch of indices, starting a new epoch when the current one is exhausted.
    pub fn next_indices(&mut self) -> Vec<usize> {
        if self.pos >= self.n {
            self.epoch += 1;
            self.reshuffle();
        }
        let end = (self.pos + self.batch_size).min(self.n);
        let out = self.order[self.pos..end].to_vec();
        self.pos = end;
        out
    }

    /// The remaining batches of the current epoch (all of them when called at an epoch boundary).
    pub fn epoch_indices(&mut self) -> Vec<Vec<usize>> {
        if self.pos >= self.n {
            self.epoch += 1;
            self.reshuffle();
        }
        let mut out = Vec::with_capacity(self.batches_per_epoch());
        while self.pos < self.n {
            out.push(self.next_indices());
        }
        out
    }

    pub fn next_batch(&mut self, data: &Dataset) -> Result<Minibatch> {
        let idx = self.next_indices();
        data.batch(&idx)
    }
}
