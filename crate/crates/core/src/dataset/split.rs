use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, DatasetError};

#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    /// Parent row indices of `train`, ascending.
    pub train_indices: Vec<usize>,
    /// Parent row indices of `test`, ascending.
    pub test_indices: Vec<usize>,
    pub train_fraction: f64,
    pub seed: u64,
}

/// Stratified shuffled split. Each class is shuffled independently (class 0
/// first, from one seeded stream) and `floor(train_fraction * n_class)` of its
/// rows go to train, the rest to test. Both partitions keep parent row order.
pub fn stratified_split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitPair, DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::Invalid(format!("train fraction {train_fraction} not in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for label in [0u8, 1] {
        let mut idx = ds.indices_of(label);
        idx.shuffle(&mut rng);
        let cut = (train_fraction * idx.len() as f64).floor() as usize;
        if cut == 0 || cut == idx.len() {
            return Err(DatasetError::DegenerateSplit { label, train_fraction });
        }
        train_indices.extend_from_slice(&idx[..cut]);
        test_indices.extend_from_slice(&idx[cut..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok(SplitPair {
        train: ds.subset(&train_indices)?,
        test: ds.subset(&test_indices)?,
        train_indices,
        test_indices,
        train_fraction,
        seed,
    })
}
