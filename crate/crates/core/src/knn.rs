//! Exact Euclidean neighbor queries with deterministic tie-breaking.
//!
//! Every ranking in this crate orders candidates by `(distance, row index)`,
//! both ascending, where the distance is the value returned by [`euclidean`].

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KnnError {
    #[error("vector lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("requested {requested} neighbors but only {available} candidates")]
    InsufficientCandidates { requested: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborList {
    pub query_index: usize,
    pub neighbors: Vec<Neighbor>,
}

impl NeighborList {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.neighbors.iter().map(|n| n.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMode {
    Nearest,
    Farthest,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64, KnnError> {
    if a.len() != b.len() {
        return Err(KnnError::LengthMismatch(a.len(), b.len()));
    }
    Ok(distance(a, b))
}

/// Unchecked Euclidean distance; callers guarantee equal lengths.
#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Canonical neighbor order: distance ascending, then index ascending.
#[inline]
pub(crate) fn by_distance_then_index(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index))
}

fn candidates(points: &Matrix, query: usize, restrict_to: Option<&[usize]>) -> Vec<Neighbor> {
    let q = points.row(query);
    let make = |i: usize| Neighbor { index: i, distance: distance(q, points.row(i)) };
    match restrict_to {
        Some(set) => set.iter().copied().filter(|&i| i != query).map(make).collect(),
        None => (0..points.rows()).filter(|&i| i != query).map(make).collect(),
    }
}

/// The `k` nearest rows to row `query`, excluding the query itself.
///
/// Candidates are `restrict_to` (or all rows) minus `query`. Output is sorted
/// by distance, ties broken by ascending row index.
pub fn k_nearest(
    points: &Matrix,
    query: usize,
    k: usize,
    restrict_to: Option<&[usize]>,
) -> Result<NeighborList, KnnError> {
    let mut cands = candidates(points, query, restrict_to);
    if k == 0 || k > cands.len() {
        return Err(KnnError::InsufficientCandidates { requested: k, available: cands.len() });
    }
    if k < cands.len() {
        cands.select_nth_unstable_by(k - 1, by_distance_then_index);
        cands.truncate(k);
    }
    cands.sort_unstable_by(by_distance_then_index);
    Ok(NeighborList { query_index: query, neighbors: cands })
}

/// Mean distance from row `query` to its `m` nearest (or farthest) rows of `targets`.
///
/// The selected distances are summed in canonical ascending order before
/// dividing, so the result does not depend on the order of `targets`.
pub fn mean_distance_to(
    points: &Matrix,
    query: usize,
    targets: &[usize],
    m: usize,
    mode: DistanceMode,
) -> Result<f64, KnnError> {
    if m == 0 || m > targets.len() {
        return Err(KnnError::InsufficientCandidates { requested: m, available: targets.len() });
    }
    let q = points.row(query);
    let mut d: Vec<Neighbor> =
        targets.iter().map(|&i| Neighbor { index: i, distance: distance(q, points.row(i)) }).collect();
    d.sort_unstable_by(by_distance_then_index);
    let chosen = match mode {
        DistanceMode::Nearest => &d[..m],
        DistanceMode::Farthest => &d[d.len() - m..],
    };
    Ok(chosen.iter().map(|n| n.distance).sum::<f64>() / m as f64)
}

/// Distance from every row to its nearest other row (no restriction).
pub(crate) fn nearest_distances(points: &Matrix) -> Vec<f64> {
    let n = points.rows();
    let mut best = vec![f64::INFINITY; n];
    for i in 0..n {
        let ri = points.row(i);
        for j in i + 1..n {
            let d = distance(ri, points.row(j));
            if d < best[i] {
                best[i] = d;
            }
            if d < best[j] {
                best[j] = d;
            }
        }
    }
    best
}
