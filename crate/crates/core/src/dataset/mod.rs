//! Binary-labelled tabular datasets: parsing, descriptors and splitting.
//!
//! Label `1` is always the minority (positive) class and label `0` the
//! majority (negative) class. Both parsers canonicalize the class column
//! so that this holds for every freshly parsed dataset.

mod delimited;
mod keel;
mod split;

pub use delimited::{parse_csv, write_csv, LabelColumn};
pub use keel::{parse_keel, serialize_keel};
pub use split::{stratified_split, SplitPair};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("class attribute must have exactly 2 observed values, found {found}: {values:?}")]
    NonBinaryClass { found: usize, values: Vec<String> },
    #[error("line {line}: cannot parse {value:?} as a number ({column})")]
    NonNumericValue { line: usize, column: String, value: String },
    #[error("dataset has no data rows")]
    EmptyData,
    #[error("unknown label column {0}")]
    UnknownLabelColumn(String),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("split would leave a partition without class {label} (train fraction {train_fraction})")]
    DegenerateSplit { label: u8, train_fraction: f64 },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// A nominal input attribute that was expanded into one indicator column per value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NominalExpansion {
    pub attribute: String,
    pub values: Vec<String>,
    /// Index of the first indicator column in the feature matrix.
    pub first_column: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    features: Matrix,
    labels: Vec<u8>,
    attribute_names: Vec<String>,
    /// Original class values, indexed by label (`[negative, positive]`).
    class_names: [String; 2],
    source_encoding: Vec<NominalExpansion>,
}

impl Dataset {
    /// Validates and builds a dataset. Both classes must be present, every
    /// value finite and `d >= 1`. Class order is taken as given.
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        labels: Vec<u8>,
        attribute_names: Vec<String>,
    ) -> Result<Self, DatasetError> {
        let ds = Self {
            name: name.into(),
            features,
            labels,
            attribute_names,
            class_names: ["negative".to_string(), "positive".to_string()],
            source_encoding: Vec::new(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_class_names(mut self, negative: impl Into<String>, positive: impl Into<String>) -> Self {
        self.class_names = [negative.into(), positive.into()];
        self
    }

    pub fn with_source_encoding(mut self, encoding: Vec<NominalExpansion>) -> Self {
        self.source_encoding = encoding;
        self
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let n = self.features.rows();
        let d = self.features.cols();
        if n == 0 {
            return Err(DatasetError::EmptyData);
        }
        if d == 0 {
            return Err(DatasetError::Invalid("dataset has no feature columns".into()));
        }
        if self.labels.len() != n {
            return Err(DatasetError::Invalid(format!("{} labels for {} rows", self.labels.len(), n)));
        }
        if self.attribute_names.len() != d {
            return Err(DatasetError::Invalid(format!(
                "{} attribute names for {} columns",
                self.attribute_names.len(),
                d
            )));
        }
        if let Some(l) = self.labels.iter().find(|&&l| l > 1) {
            return Err(DatasetError::Invalid(format!("label {l} is not binary")));
        }
        if let Some(pos) = self.features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::Invalid(format!("non-finite value at row {}", pos / d)));
        }
        if self.count(0) == 0 || self.count(1) == 0 {
            return Err(DatasetError::Invalid("both classes must be present".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.features.rows()
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// Attribute count before nominal expansion.
    pub fn n_source_attributes(&self) -> usize {
        let expanded: usize = self.source_encoding.iter().map(|e| e.values.len().saturating_sub(1)).sum();
        self.n_features() - expanded
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn class_names(&self) -> &[String; 2] {
        &self.class_names
    }

    pub fn source_encoding(&self) -> &[NominalExpansion] {
        &self.source_encoding
    }

    pub fn count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn minority_count(&self) -> usize {
        self.count(1)
    }

    pub fn majority_count(&self) -> usize {
        self.count(0)
    }

    /// Row indices carrying `label`, ascending.
    pub fn indices_of(&self, label: u8) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &l)| l == label).map(|(i, _)| i).collect()
    }

    /// Rows `indices` (in order) as a new dataset sharing this one's metadata.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, DatasetError> {
        let features = self.features.select_rows(indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        self.with_rows(features, labels)
    }

    /// Same metadata, different rows.
    pub fn with_rows(&self, features: Matrix, labels: Vec<u8>) -> Result<Self, DatasetError> {
        let ds = Self {
            name: self.name.clone(),
            features,
            labels,
            attribute_names: self.attribute_names.clone(),
            class_names: self.class_names.clone(),
            source_encoding: self.source_encoding.clone(),
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Loads a `.dat` (KEEL) or `.csv` file; CSV uses `label` or the last column.
    pub fn load(path: &Path, label: Option<LabelColumn>) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let is_csv = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("csv"))
            .unwrap_or(false);
        if is_csv {
            let mut ds = parse_csv(&text, label.unwrap_or(LabelColumn::Last))?;
            ds.name = stem;
            Ok(ds)
        } else {
            parse_keel(&text)
        }
    }
}

/// Majority count divided by minority count.
pub fn imbalance_ratio(ds: &Dataset) -> f64 {
    ds.majority_count() as f64 / ds.minority_count() as f64
}

/// Maps raw class values to labels: the rarer value becomes `1`; on a tie the
/// value declared (or first seen) first becomes `1`.
///
/// `declared` lists class values in declaration order; observed values missing
/// from it are appended in order of first appearance.
pub(crate) fn canonicalize_classes(
    raw: &[String],
    declared: &[String],
) -> Result<(Vec<u8>, [String; 2]), DatasetError> {
    let mut order: Vec<String> = Vec::new();
    for v in declared.iter().chain(raw.iter()) {
        if !order.contains(v) {
            order.push(v.clone());
        }
    }
    let counts: Vec<(String, usize)> = order
        .into_iter()
        .map(|v| {
            let c = raw.iter().filter(|r| **r == v).count();
            (v, c)
        })
        .filter(|(_, c)| *c > 0)
        .collect();
    if counts.len() != 2 {
        return Err(DatasetError::NonBinaryClass {
            found: counts.len(),
            values: counts.into_iter().map(|(v, _)| v).collect(),
        });
    }
    let (first, second) = (&counts[0], &counts[1]);
    let (positive, negative) = if second.1 < first.1 { (second, first) } else { (first, second) };
    let labels = raw.iter().map(|v| u8::from(*v == positive.0)).collect();
    Ok((labels, [negative.0.clone(), positive.0.clone()]))
}
