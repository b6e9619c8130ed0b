//! Repeated-run experiments: split, resample, normalize, train, evaluate,
//! then aggregate the per-run metrics.

mod matrix;
mod report;
mod run;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetError;
use crate::metrics::MetricsError;
use crate::nn::{ModelKind, NetError, TrainConfig};
use crate::preprocessing::PreprocessError;
use crate::resampling::{ResampleError, SamplerConfig, SamplerKind};

pub use matrix::{summarize_matrix, CellOutcome, MatrixRow};
pub use report::{
    aggregate, emit_report, render_csv, render_json, summarize, AggregateMetrics, AggregateReport, ConfigEcho,
    MetricCell, MetricSummary, ReportFormat, RunMetrics, RunResult, SCHEMA_VERSION,
};
pub use run::{run_experiment, run_experiment_on, ExperimentOutcome, LeakageAudit};

/// Whether resampling and normalization happen before the split (`Paper`)
/// or on the training partition only (`Sound`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeakageMode {
    Sound,
    Paper,
}

impl fmt::Display for LeakageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sound => "sound",
            Self::Paper => "paper",
        })
    }
}

impl FromStr for LeakageMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sound" => Ok(Self::Sound),
            "paper" => Ok(Self::Paper),
            other => Err(format!("unknown leakage mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    /// `None` trains on the data as loaded.
    pub sampler: Option<SamplerKind>,
    pub sampler_config: SamplerConfig,
    pub model: ModelKind,
    pub train: TrainConfig,
    pub runs: usize,
    pub train_fraction: f64,
    pub master_seed: u64,
    pub leakage_mode: LeakageMode,
    /// Worker threads; `0` or `1` runs sequentially. Never affects results.
    pub parallel: usize,
    /// Measure wall time per run. Off by default so reports are reproducible byte for byte.
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn new(dataset: impl Into<PathBuf>, sampler: Option<SamplerKind>, model: ModelKind) -> Self {
        Self {
            dataset: dataset.into(),
            sampler,
            sampler_config: SamplerConfig::default(),
            model,
            train: TrainConfig::default(),
            runs: 100,
            train_fraction: 0.8,
            master_seed: 0,
            leakage_mode: LeakageMode::Sound,
            parallel: 1,
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.runs == 0 {
            return Err(BenchError::InvalidConfig("runs must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(BenchError::InvalidConfig(format!(
                "train fraction {} must be in (0, 1)",
                self.train_fraction
            )));
        }
        self.sampler_config.validate().map_err(|e| BenchError::InvalidConfig(e.to_string()))?;
        self.train.validate().map_err(|e| BenchError::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("run {run}: {source}")]
    Run { run: usize, source: RunError },
    #[error("metric {0} is undefined in every run")]
    AllUndefined(&'static str),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run_index`: `splitmix64(splitmix64(master) ^ run_index)`.
///
/// The master seed is mixed before the XOR; otherwise masters differing only
/// in their low bits would reuse each other's run seeds.
pub fn run_seed(master_seed: u64, run_index: usize) -> u64 {
    splitmix64(splitmix64(master_seed) ^ run_index as u64)
}

/// Independent per-stage streams derived from a run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSeeds {
    pub split: u64,
    pub sampler: u64,
    pub model: u64,
}

impl StageSeeds {
    pub fn of(run_seed: u64) -> Self {
        Self { split: splitmix64(run_seed ^ 1), sampler: splitmix64(run_seed ^ 2), model: splitmix64(run_seed ^ 3) }
    }
}
