use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `train : test` ratio. `1:0` puts every sample in the training set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: u32,
    pub test: u32,
}

impl Default for SplitRatio {
    fn default() -> Self {
        Self { train: 4, test: 1 }
    }
}

impl SplitRatio {
    pub fn new(train: u32, test: u32) -> Result<Self> {
        let r = Self { train, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train == 0 {
            return Err(Error::Validation(format!(
                "split ratio {}:{} leaves no training data",
                self.train, self.test
            )));
        }
        Ok(())
    }

    /// Number of training samples out of `n`, rounded to nearest.
    pub fn train_count(&self, n: usize) -> usize {
        let total = (self.train + self.test) as u128;
        ((n as u128 * self.train as u128 * 2 + total) / (2 * total)) as usize
    }
}

/// Seeded shuffled partition of `0..n` into disjoint train and test indices.
pub fn split_dataset(n: usize, ratio: SplitRatio, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    ratio.validate()?;
    if n == 0 {
        return Err(Error::Validation("cannot split an empty dataset".into()));
    }
    let n_train = ratio.train_count(n);
    if n_train == 0 || (ratio.test > 0 && n_train == n) {
        return Err(Error::Validation(format!(
            "split {}:{} of {n} samples leaves one side empty",
            ratio.train, ratio.test
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = idx.split_off(n_train);
    Ok((idx, test))
}
