use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::data::TrainSplit;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::seeded;
use crate::scalar::Float;

/// Seeded without-replacement mini-batch sampler. Every epoch visits each
/// training row exactly once; the final short batch is kept.
pub struct BatchSampler {
    n: usize,
    batch_size: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("sampler over an empty dataset"));
        }
        if batch_size < 2 {
            return Err(Error::config("batch_size must be at least 2"));
        }
        Ok(BatchSampler {
            n,
            batch_size,
            rng: seeded(seed, "sampler"),
        })
    }

    /// One epoch worth of batches (fresh permutation). Row order inside a
    /// batch is canonical (sorted); only the composition is random, which
    /// keeps pair tie-breaks and float summation order reproducible.
    pub fn epoch(&mut self) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.shuffle(&mut self.rng);
        order
            .chunks(self.batch_size)
            .map(|c| {
                let mut batch = c.to_vec();
                batch.sort_unstable();
                batch
            })
            .collect()
    }
}

/// One assembled mini-batch: features, classifier targets (unlabeled rows
/// collapse to the aggregate class `n_known`), and where the unlabeled rows
/// sit inside the batch.
pub struct Batch<F> {
    pub x: Matrix<F>,
    pub targets: Vec<usize>,
    pub unlabeled_pos: Vec<usize>,
    /// Original row ids in the training split (for augmentation pools).
    pub row_ids: Vec<usize>,
}

pub fn assemble_batch<F: Float>(
    split: &TrainSplit<F>,
    n_known: usize,
    indices: &[usize],
) -> Batch<F> {
    let x = split.x.select_rows(indices);
    let mut targets = Vec::with_capacity(indices.len());
    let mut unlabeled_pos = Vec::new();
    for (pos, &row) in indices.iter().enumerate() {
        match split.labels[row] {
            Some(class) => targets.push(class),
            None => {
                targets.push(n_known);
                unlabeled_pos.push(pos);
            }
        }
    }
    Batch {
        x,
        targets,
        unlabeled_pos,
        row_ids: indices.to_vec(),
    }
}
