use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    round_count, with_appended_minority, ResampleError, ResampleResult, SamplerConfig, SamplerKind, SyntheticOrigin,
};
use crate::dataset::Dataset;
use crate::knn::k_nearest;
use crate::matrix::Matrix;

/// SMOTE oversampling.
///
/// Generates `round(majority * target_ratio) - minority` synthetic rows. For
/// each one the generator draws, in order: the base's position among the
/// minority rows (`gen_range(0..minority)`), the neighbor's rank among the
/// base's `k` nearest minority rows (`gen_range(0..k)`), and
/// `lambda = gen_range(0.0..=1.0)`. The row is `base + lambda * (neighbor - base)`.
///
/// `smote_k` is clamped to `minority - 1` when the minority class is smaller.
pub fn smote(ds: &Dataset, cfg: &SamplerConfig) -> Result<ResampleResult, ResampleError> {
    cfg.validate()?;
    let minority = ds.indices_of(1);
    if minority.len() < 2 {
        return Err(ResampleError::TooFewMinority(minority.len()));
    }
    let target = round_count(ds.majority_count() as f64 * cfg.target_ratio);
    let extra = target.saturating_sub(minority.len());
    if extra == 0 {
        return Ok(ResampleResult {
            dataset: ds.clone(),
            kind: SamplerKind::Smote,
            removed_indices: Vec::new(),
            synthetic_lineage: Vec::new(),
            duplicated_indices: Vec::new(),
        });
    }

    let k = if cfg.smote_k > minority.len() - 1 {
        log::warn!(
            "{}: smote_k {} exceeds minority size - 1, clamping to {}",
            ds.name,
            cfg.smote_k,
            minority.len() - 1
        );
        minority.len() - 1
    } else {
        cfg.smote_k
    };

    let points = ds.features();
    let neighbors: Vec<Vec<usize>> = minority
        .iter()
        .map(|&i| k_nearest(points, i, k, Some(&minority)).map(|nl| nl.indices().collect()))
        .collect::<Result<_, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut lineage = Vec::with_capacity(extra);
    let mut synthetic = Matrix::zeros(0, ds.n_features());
    let mut row = vec![0.0; ds.n_features()];
    for _ in 0..extra {
        let pos = rng.gen_range(0..minority.len());
        let rank = rng.gen_range(0..k);
        let lambda: f64 = rng.gen_range(0.0..=1.0);
        let (base, neighbor) = (minority[pos], neighbors[pos][rank]);
        for ((out, &b), &n) in row.iter_mut().zip(points.row(base)).zip(points.row(neighbor)) {
            *out = b + lambda * (n - b);
        }
        synthetic.push_row(&row);
        lineage.push(SyntheticOrigin { base, neighbor, lambda });
    }

    Ok(ResampleResult {
        dataset: with_appended_minority(ds, &synthetic)?,
        kind: SamplerKind::Smote,
        removed_indices: Vec::new(),
        synthetic_lineage: lineage,
        duplicated_indices: Vec::new(),
    })
}
