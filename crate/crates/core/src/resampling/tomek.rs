use super::{undersampled, ResampleError, ResampleResult, SamplerConfig, SamplerKind};
use crate::dataset::Dataset;
use crate::knn::{distance, nearest_distances};
use crate::matrix::Matrix;

/// All cross-class pairs `(i, j)`, `i < j`, such that no third row is strictly
/// closer to either `i` or `j` than they are to each other.
///
/// Equivalently, `d(i, j)` equals both `i`'s and `j`'s nearest-neighbor
/// distance. With exact distance ties a row can belong to several links.
pub fn find_tomek_links(ds: &Dataset) -> Vec<(usize, usize)> {
    links_in(ds.features(), ds.labels())
}

pub(crate) fn links_in(points: &Matrix, labels: &[u8]) -> Vec<(usize, usize)> {
    let n = points.rows();
    if n < 2 {
        return Vec::new();
    }
    let nearest = nearest_distances(points);
    let mut links = Vec::new();
    for i in 0..n {
        let ri = points.row(i);
        for j in i + 1..n {
            if labels[i] == labels[j] {
                continue;
            }
            let d = distance(ri, points.row(j));
            if d == nearest[i] && d == nearest[j] {
                links.push((i, j));
            }
        }
    }
    links
}

/// Removes the majority member of every Tomek link, links computed once on the input.
pub fn tomek_links(ds: &Dataset, cfg: &SamplerConfig) -> Result<ResampleResult, ResampleError> {
    cfg.validate()?;
    let labels = ds.labels();
    let mut removed: Vec<usize> = find_tomek_links(ds)
        .into_iter()
        .map(|(i, j)| if labels[i] == 0 { i } else { j })
        .collect();
    removed.sort_unstable();
    removed.dedup();
    undersampled(ds, SamplerKind::TomekLinks, removed)
}
