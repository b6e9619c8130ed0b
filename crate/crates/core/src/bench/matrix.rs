use serde::{Deserialize, Serialize};

use super::report::AggregateMetrics;
use crate::metrics::METRIC_NAMES;
use crate::nn::ModelKind;
use crate::resampling::SamplerKind;

/// Result of one (dataset, sampler, model) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub dataset: String,
    pub sampler: Option<SamplerKind>,
    pub model: ModelKind,
    /// Aggregate of the cell, or the error message of a failed cell.
    pub result: Result<AggregateMetrics, String>,
}

/// Per-metric means over datasets for one sampler and model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub sampler: String,
    pub model: ModelKind,
    pub datasets: usize,
    pub failed: Vec<String>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub g_mean: Option<f64>,
    pub specificity: Option<f64>,
    pub kappa: Option<f64>,
    pub auc: Option<f64>,
    /// Highest mean accuracy among all rows.
    pub best: bool,
}

impl MatrixRow {
    pub fn means(&self) -> [Option<f64>; 8] {
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

    pub fn csv_header() -> Vec<&'static str> {
        let mut h = vec!["sampler", "model", "datasets", "failed"];
        h.extend(METRIC_NAMES);
        h.push("best");
        h
    }

    pub fn csv_record(&self) -> Vec<String> {
        let mut r = vec![
            self.sampler.clone(),
            self.model.to_string(),
            self.datasets.to_string(),
            self.failed.join(";"),
        ];
        r.extend(self.means().map(|m| m.map(|v| v.to_string()).unwrap_or_default()));
        r.push(self.best.to_string());
        r
    }
}

fn sampler_name(s: Option<SamplerKind>) -> String {
    s.map_or_else(|| "none".to_string(), |k| k.as_str().to_string())
}

/// Groups cells by sampler and model (first-seen order) and averages each
/// metric's per-dataset means over the datasets where it is defined.
pub fn summarize_matrix(cells: &[CellOutcome]) -> Vec<MatrixRow> {
    let mut keys: Vec<(Option<SamplerKind>, ModelKind)> = Vec::new();
    for c in cells {
        if !keys.contains(&(c.sampler, c.model)) {
            keys.push((c.sampler, c.model));
        }
    }
    let mut rows: Vec<MatrixRow> = keys
        .into_iter()
        .map(|(sampler, model)| {
            let group: Vec<&CellOutcome> = cells.iter().filter(|c| c.sampler == sampler && c.model == model).collect();
            let ok: Vec<&AggregateMetrics> = group.iter().filter_map(|c| c.result.as_ref().ok()).collect();
            let failed = group.iter().filter(|c| c.result.is_err()).map(|c| c.dataset.clone()).collect();
            let means: [Option<f64>; 8] = std::array::from_fn(|m| {
                let vals: Vec<f64> = ok.iter().filter_map(|a| a.means()[m]).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            });
            let [accuracy, precision, recall, f1, g_mean, specificity, kappa, auc] = means;
            MatrixRow {
                sampler: sampler_name(sampler),
                model,
                datasets: ok.len(),
                failed,
                accuracy,
                precision,
                recall,
                f1,
                g_mean,
                specificity,
                kappa,
                auc,
                best: false,
            }
        })
        .collect();
    let mut best: Option<usize> = None;
    for (i, r) in rows.iter().enumerate() {
        if let Some(a) = r.accuracy {
            if best.is_none_or(|b| a > rows[b].accuracy.unwrap_or(f64::NEG_INFINITY)) {
                best = Some(i);
            }
        }
    }
    if let Some(b) = best {
        rows[b].best = true;
    }
    rows
}
