use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{round_count, undersampled, with_appended_minority, ResampleError, ResampleResult, SamplerConfig, SamplerKind};
use crate::dataset::Dataset;

/// Random oversampling with replacement.
///
/// Appends `round(majority * target_ratio) - minority` copies; copy `g` is
/// minority row number `rng.gen_range(0..minority)` (minority rows listed in
/// ascending index order).
pub fn ros(ds: &Dataset, cfg: &SamplerConfig) -> Result<ResampleResult, ResampleError> {
    cfg.validate()?;
    let minority = ds.indices_of(1);
    let target = round_count(ds.majority_count() as f64 * cfg.target_ratio);
    let extra = target.saturating_sub(minority.len());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let duplicated: Vec<usize> = (0..extra).map(|_| minority[rng.gen_range(0..minority.len())]).collect();
    let copies = ds.features().select_rows(&duplicated);
    Ok(ResampleResult {
        dataset: with_appended_minority(ds, &copies)?,
        kind: SamplerKind::Ros,
        removed_indices: Vec::new(),
        synthetic_lineage: Vec::new(),
        duplicated_indices: duplicated,
    })
}

/// Random undersampling without replacement.
///
/// Keeps `round(minority / target_ratio)` majority rows. The rows to drop are
/// the first `r` slots of a partial Fisher-Yates shuffle of the ascending
/// majority index list (`swap(i, rng.gen_range(i..len))` for `i < r`).
pub fn rus(ds: &Dataset, cfg: &SamplerConfig) -> Result<ResampleResult, ResampleError> {
    cfg.validate()?;
    let mut majority = ds.indices_of(0);
    let target = round_count(ds.minority_count() as f64 / cfg.target_ratio);
    if target < 1 {
        return Err(ResampleError::DegenerateOutput(0));
    }
    let drop = majority.len().saturating_sub(target);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in 0..drop {
        let j = rng.gen_range(i..majority.len());
        majority.swap(i, j);
    }
    let mut removed = majority[..drop].to_vec();
    removed.sort_unstable();
    undersampled(ds, SamplerKind::Rus, removed)
}
