//! Min-max scaling to `[0, 1]` with separate fit and apply steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::matrix::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("dataset has {found} features, normalization was fitted on {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn fit_minmax(ds: &Dataset) -> NormalizationParams {
    let d = ds.n_features();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for row in ds.features().iter_rows() {
        for (j, &v) in row.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    NormalizationParams { min, max }
}

/// `(x - min) / (max - min)` per feature. Constant features map to `0.0`;
/// values outside the fitted range are not clamped.
pub fn apply_minmax(params: &NormalizationParams, ds: &Dataset) -> Result<Dataset, PreprocessError> {
    let d = ds.n_features();
    if d != params.min.len() {
        return Err(PreprocessError::DimensionMismatch { expected: params.min.len(), found: d });
    }
    let mut out = Vec::with_capacity(ds.n_samples() * d);
    for row in ds.features().iter_rows() {
        for (j, &v) in row.iter().enumerate() {
            let span = params.max[j] - params.min[j];
            out.push(if span > 0.0 { (v - params.min[j]) / span } else { 0.0 });
        }
    }
    Ok(ds.with_rows(Matrix::from_vec(ds.n_samples(), d, out), ds.labels().to_vec())?)
}
