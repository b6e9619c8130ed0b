use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BenchError, LeakageMode};
use crate::metrics::{ConfusionMatrix, MetricValue, MetricsReport, METRIC_NAMES};
use crate::nn::{ModelKind, TrainConfig};
use crate::resampling::{SamplerConfig, SamplerKind};

pub const SCHEMA_VERSION: u32 = 1;

/// A single metric in the per-run section; `null` when undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub value: MetricValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub accuracy: MetricCell,
    pub precision: MetricCell,
    pub recall: MetricCell,
    pub f1: MetricCell,
    pub g_mean: MetricCell,
    pub specificity: MetricCell,
    pub kappa: MetricCell,
    pub auc: MetricCell,
}

impl From<MetricsReport> for RunMetrics {
    fn from(r: MetricsReport) -> Self {
        let c = |value| MetricCell { value };
        Self {
            accuracy: c(r.accuracy),
            precision: c(r.precision),
            recall: c(r.recall),
            f1: c(r.f1),
            g_mean: c(r.g_mean),
            specificity: c(r.specificity),
            kappa: c(r.kappa),
            auc: c(r.auc),
        }
    }
}

impl RunMetrics {
    pub fn values(&self) -> [MetricValue; 8] {
        [
            self.accuracy.value,
            self.precision.value,
            self.recall.value,
            self.f1.value,
            self.g_mean.value,
            self.specificity.value,
            self.kappa.value,
            self.auc.value,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub confusion: ConfusionMatrix,
    pub metrics: RunMetrics,
    /// Training loss at the last epoch; `null` when trained for zero epochs.
    pub final_loss: Option<f64>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
    pub n_defined: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub accuracy: MetricSummary,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
    pub g_mean: MetricSummary,
    pub specificity: MetricSummary,
    pub kappa: MetricSummary,
    pub auc: MetricSummary,
}

impl AggregateMetrics {
    fn from_array(s: [MetricSummary; 8]) -> Self {
        let [accuracy, precision, recall, f1, g_mean, specificity, kappa, auc] = s;
        Self { accuracy, precision, recall, f1, g_mean, specificity, kappa, auc }
    }

    pub fn summaries(&self) -> [MetricSummary; 8] {
        [
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            self.g_mean,
            self.specificity,
            self.kappa,
            self.auc,
        ]
    }

    pub fn means(&self) -> [Option<f64>; 8] {
        self.summaries().map(|s| s.mean)
    }
}

/// The experiment settings that determine the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub dataset: String,
    pub sampler: Option<SamplerKind>,
    pub sampler_config: SamplerConfig,
    pub model: ModelKind,
    pub train: TrainConfig,
    pub runs: usize,
    pub train_fraction: f64,
    pub master_seed: u64,
    pub leakage_mode: LeakageMode,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema_version: u32,
    pub config: ConfigEcho,
    pub runs: Vec<RunResult>,
    pub aggregate: AggregateMetrics,
    pub roc_best_auc: Vec<[f64; 2]>,
}

fn summary(values: impl Iterator<Item = Option<f64>>) -> MetricSummary {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        return MetricSummary { mean: None, stddev: None, n_defined: 0 };
    }
    let n = defined.len() as f64;
    let lo = defined.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // rounding in the sum can push the mean a hair outside the observed range
    let mean = (defined.iter().sum::<f64>() / n).clamp(lo, hi);
    let var = defined.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MetricSummary { mean: Some(mean), stddev: Some(var.sqrt()), n_defined: defined.len() }
}

/// Mean and population standard deviation per metric over defined values.
/// Metrics undefined in every run get `null` statistics.
pub fn summarize(results: &[RunResult]) -> AggregateMetrics {
    AggregateMetrics::from_array(std::array::from_fn(|m| summary(results.iter().map(|r| r.metrics.values()[m]))))
}

/// Like [`summarize`], but a metric undefined in every run is an error.
pub fn aggregate(results: &[RunResult]) -> Result<AggregateMetrics, BenchError> {
    if results.is_empty() {
        return Err(BenchError::InvalidConfig("no runs to aggregate".into()));
    }
    let agg = summarize(results);
    if let Some(m) = agg.summaries().iter().position(|s| s.n_defined == 0) {
        return Err(BenchError::AllUndefined(METRIC_NAMES[m]));
    }
    Ok(agg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Json => "json",
            Self::Csv => "csv",
        })
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

pub fn render_json(report: &AggregateReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per run and a trailing `mean` row. Undefined values are empty cells.
pub fn render_csv(report: &AggregateReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["run", "seed", "tp", "fn", "fp", "tn"];
    header.extend(METRIC_NAMES);
    header.extend(["final_loss", "wall_ms"]);
    w.write_record(&header).expect("in-memory write");
    for r in &report.runs {
        let c = &r.confusion;
        let mut row = vec![
            r.run.to_string(),
            r.seed.to_string(),
            c.tp.to_string(),
            c.fn_.to_string(),
            c.fp.to_string(),
            c.tn.to_string(),
        ];
        row.extend(r.metrics.values().map(cell));
        row.push(cell(r.final_loss));
        row.push(r.wall_ms.to_string());
        w.write_record(&row).expect("in-memory write");
    }
    let mut mean = vec!["mean".to_string()];
    mean.extend(std::iter::repeat_n(String::new(), 5));
    mean.extend(report.aggregate.means().map(cell));
    mean.extend([String::new(), String::new()]);
    w.write_record(&mean).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn emit_report(report: &AggregateReport, format: ReportFormat, path: &Path) -> Result<(), BenchError> {
    let body = match format {
        ReportFormat::Json => render_json(report),
        ReportFormat::Csv => render_csv(report),
    };
    std::fs::write(path, body).map_err(|e| BenchError::Io { path: path.display().to_string(), message: e.to_string() })
}
