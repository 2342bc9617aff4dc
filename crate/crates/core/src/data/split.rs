use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::numeric::{DenseMatrix, Minibatch};

/// Inputs (one row per example) with their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: DenseMatrix,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(inputs: DenseMatrix, labels: Vec<usize>) -> Result<Self> {
        check_len("dataset labels", inputs.rows(), labels.len())?;
        Ok(Dataset { inputs, labels })
    }

    pub fn empty(width: usize) -> Self {
        Dataset {
            inputs: DenseMatrix::zeros(0, width),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.inputs.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn batch(&self, idx: &[usize]) -> Result<Minibatch> {
        Minibatch::new(
            self.inputs.select_rows(idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// The whole dataset as one minibatch.
    pub fn as_batch(&self) -> Result<Minibatch> {
        Minibatch::new(self.inputs.clone(), self.labels.clone())
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().map(|&y| y + 1).max().unwrap_or(0)
    }
}

/// Disjoint training / validation / test sets.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    /// Positions in the original pool, each list ascending.
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Holds out `val_count` examples of the pool for validation, chosen by a seeded
/// permutation. The test set is left empty.
pub fn make_split(
    inputs: DenseMatrix,
    labels: Vec<usize>,
    val_count: usize,
    seed: u64,
) -> Result<DatasetSplit> {
    let pool = Dataset::new(inputs, labels)?;
    if val_count >= pool.len() {
        return Err(Error::config(format!(
            "validation count {val_count} must be smaller than the pool of {}",
            pool.len()
        )));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val_indices = order[..val_count].to_vec();
    let mut train_indices = order[val_count..].to_vec();
    val_indices.sort_unstable();
    train_indices.sort_unstable();
    Ok(DatasetSplit {
        train: pool.subset(&train_indices),
        validation: pool.subset(&val_indices),
        test: Dataset::empty(pool.width()),
        train_indices,
        val_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(n: usize) -> (DenseMatrix, Vec<usize>) {
        let x = DenseMatrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        (x, (0..n).map(|i| i % 10).collect())
    }

    #[test]
    fn sizes_match_mnist_holdout() {
        let (x, y) = pool(60_000);
        let s = make_split(x, y, 10_000, 1).unwrap();
        assert_eq!(s.train.len(), 50_000);
        assert_eq!(s.validation.len(), 10_000);
    }

    #[test]
    fn disjoint_and_deterministic() {
        let (x, y) = pool(500);
        let a = make_split(x.clone(), y.clone(), 120, 7).unwrap();
        let b = make_split(x.clone(), y.clone(), 120, 7).unwrap();
        assert_eq!(a.val_indices, b.val_indices);
        assert_eq!(a.train_indices, b.train_indices);
        let mut all: Vec<usize> = a
            .val_indices
            .iter()
            .chain(&a.train_indices)
            .cloned()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..500).collect::<Vec<_>>());
        // rows follow the index sets
        assert_eq!(a.validation.inputs.get(0, 0), a.val_indices[0] as f64);
        let c = make_split(x, y, 120, 8).unwrap();
        assert_ne!(a.val_indices, c.val_indices);
    }

    #[test]
    fn degenerate_counts() {
        let (x, y) = pool(10);
        let s = make_split(x.clone(), y.clone(), 0, 0).unwrap();
        assert!(s.validation.is_empty());
        assert_eq!(s.train.len(), 10);
        assert!(matches!(make_split(x, y, 10, 0), Err(Error::Config(_))));
    }
}
