//! Deterministic shuffled mini-batches.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Record order for one epoch: a shuffle keyed by `(seed, epoch)`.
pub fn epoch_permutation(len: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng);
    order
}

/// Index batches covering every record exactly once; the last batch may be
/// short.
pub fn batch_indices(len: usize, batch_size: usize, seed: u64, epoch: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    if len == 0 {
        return Err(Error::Empty("shard has no records"));
    }
    Ok(epoch_permutation(len, seed, epoch)
        .chunks(batch_size)
        .map(<[usize]>::to_vec)
        .collect())
}

/// Iterates the batches of one epoch as slices of borrowed items.
pub fn batch_iterator<T>(
    items: &[T],
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<impl Iterator<Item = Vec<&T>>> {
    let batches = batch_indices(items.len(), batch_size, seed, epoch)?;
    Ok(batches
        .into_iter()
        .map(move |idx| idx.into_iter().map(|i| &items[i]).collect()))
}

/// Maps a global step onto `(epoch, batch)` positions, caching the current
/// epoch's order. Lets a resumed run see exactly the batches the
/// uninterrupted run would have.
#[derive(Debug, Clone)]
pub struct BatchSchedule {
    len: usize,
    batch_size: usize,
    seed: u64,
    epoch: Option<u64>,
    batches: Vec<Vec<usize>>,
}

impl BatchSchedule {
    pub fn new(len: usize, batch_size: usize, seed: u64) -> Result<Self> {
        batch_indices(len, batch_size, seed, 0)?;
        Ok(Self {
            len,
            batch_size,
            seed,
            epoch: None,
            batches: Vec::new(),
        })
    }

    pub fn batches_per_epoch(&self) -> u64 {
        self.len.div_ceil(self.batch_size) as u64
    }

    /// Record indices used at global step `step` (0-based).
    pub fn batch(&mut self, step: u64) -> &[usize] {
        let per = self.batches_per_epoch();
        let epoch = step / per;
        if self.epoch != Some(epoch) {
            self.batches = batch_indices(self.len, self.batch_size, self.seed, epoch)
                .expect("validated in constructor");
            self.epoch = Some(epoch);
        }
        &self.batches[(step % per) as usize]
    }
}
