//! Resampling, normalization, neural classifiers and evaluation for
//! imbalanced binary classification.

pub mod bench;
pub mod cli;
pub mod dataset;
pub mod knn;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod preprocessing;
pub mod resampling;
