//! Deterministic fold assignment shared by penalty cross-validation and the
//! cross-fitting protocol.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A balanced partition of `n` units into `folds` groups. The assignment is a
/// pure function of `(n, folds, seed)`: the units are shuffled with a ChaCha8
/// generator and dealt out round-robin, so fold sizes differ by at most one.
#[derive(Debug, Clone)]
pub struct CrossFitPlan {
    pub n: usize,
    pub folds: usize,
    pub seed: u64,
    pub assignment: Vec<usize>,
}

impl CrossFitPlan {
    pub fn new(n: usize, folds: usize, seed: u64) -> Result<Self> {
        if folds < 2 {
            return Err(Error::Parameter(format!(
                "need at least 2 folds, got {folds}"
            )));
        }
        if folds > n {
            return Err(Error::Parameter(format!(
                "cannot split {n} units into {folds} folds"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let mut assignment = vec![0usize; n];
        for (pos, &unit) in order.iter().enumerate() {
            assignment[unit] = pos % folds;
        }
        Ok(CrossFitPlan {
            n,
            folds,
            seed,
            assignment,
        })
    }

    pub fn fold_size(&self, k: usize) -> usize {
        self.assignment.iter().filter(|&&f| f == k).count()
    }

    pub fn min_fold_size(&self) -> usize {
        (0..self.folds).map(|k| self.fold_size(k)).min().unwrap_or(0)
    }

    /// Training and held-out index lists for fold `k`, in unit order.
    pub fn split(&self, k: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::with_capacity(self.n - self.n / self.folds);
        let mut test = Vec::with_capacity(self.n / self.folds + 1);
        for (i, &f) in self.assignment.iter().enumerate() {
            if f == k {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// SplitMix64 step, for deriving stream seeds from a base seed so that every
/// nested randomized task gets an independent, reproducible stream.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(salt)
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
