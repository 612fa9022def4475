use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ReviewRecord;
use crate::error::{Error, Result};

pub const DEFAULT_PROPORTIONS: [f64; 3] = [0.7, 0.1, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub proportions: [f64; 3],
    pub train: usize,
    pub validate: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<ReviewRecord>,
    pub validate: Vec<ReviewRecord>,
    pub test: Vec<ReviewRecord>,
    pub manifest: SplitManifest,
}

/// Seeded permutation of `0..n` cut into three contiguous runs.
///
/// The first two runs have `round(p·n)` elements; the third takes the rest.
pub fn partition_indices(n: usize, seed: u64, proportions: [f64; 3]) -> Result<[Vec<usize>; 3]> {
    let sum: f64 = proportions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || proportions.iter().any(|&p| p < 0.0) {
        return Err(Error::Config(format!(
            "split proportions {proportions:?} must be non-negative and sum to 1"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let a = ((proportions[0] * n as f64).round() as usize).min(n);
    let b = ((proportions[1] * n as f64).round() as usize).min(n - a);
    let test = idx.split_off(a + b);
    let validate = idx.split_off(a);
    Ok([idx, validate, test])
}

pub fn split(records: Vec<ReviewRecord>, seed: u64, proportions: [f64; 3]) -> Result<DatasetSplit> {
    let [tr, va, te] = partition_indices(records.len(), seed, proportions)?;
    let mut slots: Vec<Option<ReviewRecord>> = records.into_iter().map(Some).collect();
    let mut take = |ids: Vec<usize>| -> Vec<ReviewRecord> {
        ids.into_iter()
            .map(|i| slots[i].take().expect("indices form a partition"))
            .collect()
    };
    let (train, validate, test) = (take(tr), take(va), take(te));
    let manifest = SplitManifest {
        seed,
        proportions,
        train: train.len(),
        validate: validate.len(),
        test: test.len(),
    };
    Ok(DatasetSplit {
        train,
        validate,
        test,
        manifest,
    })
}
