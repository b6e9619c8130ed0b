use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tomek::links_in;
use super::{undersampled, ResampleError, ResampleResult, SamplerConfig, SamplerKind};
use crate::dataset::Dataset;
use crate::knn::{by_distance_then_index, distance, Neighbor};

/// One-sided selection: condensed nearest neighbor on the majority class,
/// then Tomek-link cleanup inside the condensed set.
///
/// The condensed set starts as every minority row plus the majority row at
/// position `gen_range(0..majority)`. Remaining majority rows are visited once
/// in ascending index order; a row whose 1-NN within the current set is a
/// minority row joins the set. Majority members of Tomek links computed on the
/// condensed set are then dropped. Minority rows are never removed.
pub fn oss(ds: &Dataset, cfg: &SamplerConfig) -> Result<ResampleResult, ResampleError> {
    cfg.validate()?;
    let labels = ds.labels();
    let points = ds.features();
    let majority = ds.indices_of(0);
    if majority.is_empty() {
        return Err(ResampleError::DegenerateOutput(0));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seed_row = majority[rng.gen_range(0..majority.len())];
    let mut kept = ds.indices_of(1);
    kept.push(seed_row);

    for &r in majority.iter().filter(|&&r| r != seed_row) {
        let q = points.row(r);
        let nn = kept
            .iter()
            .map(|&s| Neighbor { index: s, distance: distance(q, points.row(s)) })
            .min_by(by_distance_then_index)
            .expect("condensed set is never empty");
        if labels[nn.index] == 1 {
            kept.push(r);
        }
    }
    kept.sort_unstable();

    let sub_points = points.select_rows(&kept);
    let sub_labels: Vec<u8> = kept.iter().map(|&i| labels[i]).collect();
    let mut dropped: Vec<usize> = links_in(&sub_points, &sub_labels)
        .into_iter()
        .map(|(a, b)| if sub_labels[a] == 0 { kept[a] } else { kept[b] })
        .collect();
    dropped.sort_unstable();
    dropped.dedup();

    let mut keep_mask = vec![false; ds.n_samples()];
    for &i in &kept {
        keep_mask[i] = true;
    }
    for &i in &dropped {
        keep_mask[i] = false;
    }
    let removed = (0..ds.n_samples()).filter(|&i| !keep_mask[i]).collect();
    undersampled(ds, SamplerKind::Oss, removed)
}
