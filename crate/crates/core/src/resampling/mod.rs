//! Over- and undersamplers for binary imbalanced data.
//!
//! All samplers are deterministic functions of `(dataset, config)`. Random
//! choices come from a `ChaCha8Rng` seeded with `config.seed`, consumed in the
//! order documented on each sampler. Neighbor rankings use the
//! `(distance, index)` order of [`crate::knn`].
//!
//! Output layout: undersamplers return the surviving input rows in input
//! order; oversamplers return every input row followed by the new rows.

mod nearmiss;
mod oss;
mod random;
mod smote;
mod tomek;

pub use nearmiss::near_miss;
pub use oss::oss;
pub use random::{ros, rus};
pub use smote::smote;
pub use tomek::{find_tomek_links, tomek_links};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::knn::KnnError;
use crate::matrix::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResampleError {
    #[error("SMOTE needs at least 2 minority rows, found {0}")]
    TooFewMinority(usize),
    #[error("resampling would leave no rows of class {0}")]
    DegenerateOutput(u8),
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Knn(#[from] KnnError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Ros,
    Rus,
    Smote,
    #[serde(rename = "tl")]
    TomekLinks,
    Oss,
    NearMiss1,
    NearMiss2,
    NearMiss3,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 8] = [
        Self::Ros,
        Self::Rus,
        Self::Smote,
        Self::TomekLinks,
        Self::Oss,
        Self::NearMiss1,
        Self::NearMiss2,
        Self::NearMiss3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ros => "ros",
            Self::Rus => "rus",
            Self::Smote => "smote",
            Self::TomekLinks => "tl",
            Self::Oss => "oss",
            Self::NearMiss1 => "nearmiss1",
            Self::NearMiss2 => "nearmiss2",
            Self::NearMiss3 => "nearmiss3",
        }
    }

    pub fn is_oversampler(self) -> bool {
        matches!(self, Self::Ros | Self::Smote)
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown sampler {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NearMissVariant {
    One,
    Two,
    Three,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub smote_k: usize,
    pub nearmiss_variant: NearMissVariant,
    /// Neighbors averaged by NearMiss-1/2.
    pub nearmiss_m: usize,
    /// Majority rows kept per minority row by NearMiss-3.
    pub nearmiss3_per_minority: usize,
    /// Desired minority:majority ratio after resampling (1.0 = balanced).
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            smote_k: 5,
            nearmiss_variant: NearMissVariant::One,
            nearmiss_m: 3,
            nearmiss3_per_minority: 3,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ResampleError> {
        if self.smote_k == 0 {
            return Err(ResampleError::InvalidConfig("smote_k must be >= 1".into()));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio.is_finite()) {
            return Err(ResampleError::InvalidConfig(format!("target_ratio {} must be > 0", self.target_ratio)));
        }
        if self.nearmiss_m == 0 || self.nearmiss3_per_minority == 0 {
            return Err(ResampleError::InvalidConfig("NearMiss neighbor counts must be >= 1".into()));
        }
        Ok(())
    }
}

/// One synthetic SMOTE row: `base + lambda * (neighbor - base)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResampleResult {
    pub dataset: Dataset,
    pub kind: SamplerKind,
    /// Input rows dropped by an undersampler, ascending.
    pub removed_indices: Vec<usize>,
    pub synthetic_lineage: Vec<SyntheticOrigin>,
    /// Source rows of the ROS copies, in output order.
    pub duplicated_indices: Vec<usize>,
}

/// Provenance of a single output row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOrigin {
    Original(usize),
    Duplicate(usize),
    Synthetic { base: usize, neighbor: usize },
}

impl RowOrigin {
    /// Input rows that determined this output row.
    pub fn sources(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match *self {
            Self::Original(i) | Self::Duplicate(i) => (i, None),
            Self::Synthetic { base, neighbor } => (base, Some(neighbor)),
        };
        std::iter::once(a).chain(b)
    }
}

impl ResampleResult {
    /// Origin of every output row, given the input row count.
    pub fn origins(&self, input_rows: usize) -> Vec<RowOrigin> {
        if self.kind.is_oversampler() {
            let mut out: Vec<RowOrigin> = (0..input_rows).map(RowOrigin::Original).collect();
            out.extend(self.duplicated_indices.iter().map(|&i| RowOrigin::Duplicate(i)));
            out.extend(
                self.synthetic_lineage
                    .iter()
                    .map(|s| RowOrigin::Synthetic { base: s.base, neighbor: s.neighbor }),
            );
            out
        } else {
            let mut removed = self.removed_indices.iter().peekable();
            (0..input_rows)
                .filter(|i| {
                    if removed.peek() == Some(&i) {
                        removed.next();
                        false
                    } else {
                        true
                    }
                })
                .map(RowOrigin::Original)
                .collect()
        }
    }

    /// Row indices of the output that are still original input rows.
    pub fn kept_indices(&self, input_rows: usize) -> Vec<usize> {
        self.origins(input_rows)
            .into_iter()
            .filter_map(|o| match o {
                RowOrigin::Original(i) => Some(i),
                _ => None,
            })
            .collect()
    }
}

/// Runs the sampler named by `kind`; NearMiss kinds override `cfg.nearmiss_variant`.
pub fn resample(kind: SamplerKind, ds: &Dataset, cfg: &SamplerConfig) -> Result<ResampleResult, ResampleError> {
    match kind {
        SamplerKind::Ros => ros(ds, cfg),
        SamplerKind::Rus => rus(ds, cfg),
        SamplerKind::Smote => smote(ds, cfg),
        SamplerKind::TomekLinks => tomek_links(ds, cfg),
        SamplerKind::Oss => oss(ds, cfg),
        SamplerKind::NearMiss1 | SamplerKind::NearMiss2 | SamplerKind::NearMiss3 => {
            let variant = match kind {
                SamplerKind::NearMiss1 => NearMissVariant::One,
                SamplerKind::NearMiss2 => NearMissVariant::Two,
                _ => NearMissVariant::Three,
            };
            near_miss(ds, &SamplerConfig { nearmiss_variant: variant, ..cfg.clone() })
        }
    }
}

/// `round(x)` with halves away from zero, as a count.
pub(crate) fn round_count(x: f64) -> usize {
    x.round().max(0.0) as usize
}

/// Drops `removed` (ascending) from `ds`, keeping input order.
pub(crate) fn undersampled(
    ds: &Dataset,
    kind: SamplerKind,
    removed: Vec<usize>,
) -> Result<ResampleResult, ResampleError> {
    debug_assert!(removed.windows(2).all(|w| w[0] < w[1]));
    let mut keep = Vec::with_capacity(ds.n_samples() - removed.len());
    let mut r = removed.iter().peekable();
    for i in 0..ds.n_samples() {
        if r.peek() == Some(&&i) {
            r.next();
        } else {
            keep.push(i);
        }
    }
    for label in [0u8, 1] {
        if !keep.iter().any(|&i| ds.labels()[i] == label) {
            return Err(ResampleError::DegenerateOutput(label));
        }
    }
    Ok(ResampleResult {
        dataset: ds.subset(&keep)?,
        kind,
        removed_indices: removed,
        synthetic_lineage: Vec::new(),
        duplicated_indices: Vec::new(),
    })
}

/// Appends minority rows to `ds`.
pub(crate) fn with_appended_minority(ds: &Dataset, extra: &Matrix) -> Result<Dataset, ResampleError> {
    let mut features = ds.features().clone();
    let mut labels = ds.labels().to_vec();
    for row in extra.iter_rows().take(extra.rows()) {
        features.push_row(row);
        labels.push(1);
    }
    Ok(ds.with_rows(features, labels)?)
}
