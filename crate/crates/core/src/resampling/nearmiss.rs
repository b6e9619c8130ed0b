use super::{round_count, undersampled, NearMissVariant, ResampleError, ResampleResult, SamplerConfig, SamplerKind};
use crate::dataset::Dataset;
use crate::knn::{by_distance_then_index, k_nearest, mean_distance_to, DistanceMode, KnnError, Neighbor};

/// NearMiss undersampling.
///
/// * Variant 1 keeps the `round(minority / target_ratio)` majority rows with
///   the smallest mean distance to their `nearmiss_m` nearest minority rows.
/// * Variant 2 ranks by mean distance to the `nearmiss_m` farthest minority rows.
/// * Variant 3 keeps the union of each minority row's `nearmiss3_per_minority`
///   nearest majority rows (clamped to the majority size); the target ratio
///   is not enforced.
///
/// Ranking ties are broken by ascending row index.
pub fn near_miss(ds: &Dataset, cfg: &SamplerConfig) -> Result<ResampleResult, ResampleError> {
    cfg.validate()?;
    let points = ds.features();
    let majority = ds.indices_of(0);
    let minority = ds.indices_of(1);
    let kind = match cfg.nearmiss_variant {
        NearMissVariant::One => SamplerKind::NearMiss1,
        NearMissVariant::Two => SamplerKind::NearMiss2,
        NearMissVariant::Three => SamplerKind::NearMiss3,
    };

    let keep: Vec<usize> = match cfg.nearmiss_variant {
        NearMissVariant::One | NearMissVariant::Two => {
            if minority.len() < cfg.nearmiss_m {
                return Err(KnnError::InsufficientCandidates {
                    requested: cfg.nearmiss_m,
                    available: minority.len(),
                }
                .into());
            }
            let target = round_count(minority.len() as f64 / cfg.target_ratio);
            if target < 1 {
                return Err(ResampleError::DegenerateOutput(0));
            }
            let mode = if cfg.nearmiss_variant == NearMissVariant::One {
                DistanceMode::Nearest
            } else {
                DistanceMode::Farthest
            };
            let mut scored: Vec<Neighbor> = majority
                .iter()
                .map(|&r| {
                    mean_distance_to(points, r, &minority, cfg.nearmiss_m, mode)
                        .map(|distance| Neighbor { index: r, distance })
                })
                .collect::<Result<_, _>>()?;
            scored.sort_unstable_by(by_distance_then_index);
            scored.truncate(target);
            scored.into_iter().map(|s| s.index).collect()
        }
        NearMissVariant::Three => {
            let per = cfg.nearmiss3_per_minority.min(majority.len());
            let mut marked = vec![false; ds.n_samples()];
            for &p in &minority {
                for i in k_nearest(points, p, per, Some(&majority))?.indices() {
                    marked[i] = true;
                }
            }
            majority.iter().copied().filter(|&i| marked[i]).collect()
        }
    };

    let mut keep_mask = vec![false; ds.n_samples()];
    for &i in keep.iter().chain(&minority) {
        keep_mask[i] = true;
    }
    let removed = (0..ds.n_samples()).filter(|&i| !keep_mask[i]).collect();
    undersampled(ds, kind, removed)
}
