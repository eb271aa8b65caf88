use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// V-fold assignment of observations, built from a seeded shuffle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldScheme {
    pub v: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldScheme {
    /// Assign `n` observations to `v` folds with sizes differing by at most one.
    pub fn new(n: usize, v: usize, seed: u64) -> Result<FoldScheme> {
        if v < 1 || v > n {
            return Err(Error::InvalidArgument(format!(
                "fold count {v} must be in 1..={n}"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let mut assignment = vec![0usize; n];
        for (pos, &i) in order.iter().enumerate() {
            assignment[i] = pos % v;
        }
        Ok(FoldScheme { v, assignment, seed })
    }

    pub fn validation_indices(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn training_indices(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }
}
