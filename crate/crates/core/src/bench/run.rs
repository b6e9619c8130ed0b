use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;

use super::report::{summarize, AggregateReport, ConfigEcho, RunResult, SCHEMA_VERSION};
use super::{run_seed, BenchError, ExperimentConfig, LeakageMode, RunError, StageSeeds};
use crate::dataset::{stratified_split, Dataset};
use crate::metrics::{evaluate, RocPoint};
use crate::nn::{predict_proba, train, ModelSpec, ModelState};
use crate::preprocessing::{apply_minmax, fit_minmax};
use crate::resampling::{resample, RowOrigin};

/// Overlap between the rows that fed the sampler or the normalizer and the
/// rows the model was scored on, traced back to rows of the loaded dataset.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LeakageAudit {
    pub sampler_input_rows: usize,
    pub normalizer_input_rows: usize,
    pub test_rows: usize,
    /// Source rows both seen by the sampler and behind a test row.
    pub sampler_overlap: usize,
    /// Source rows both behind a normalizer input row and behind a test row.
    pub normalizer_overlap: usize,
}

impl LeakageAudit {
    pub fn is_clean(&self) -> bool {
        self.sampler_overlap == 0 && self.normalizer_overlap == 0
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: AggregateReport,
    /// One audit per run, in run order.
    pub audits: Vec<LeakageAudit>,
    /// Model of the run whose ROC is attached to the report.
    pub best_model: ModelState,
}

struct RunOutput {
    result: RunResult,
    roc: Vec<RocPoint>,
    audit: LeakageAudit,
    model: ModelState,
}

/// Source rows of the loaded dataset behind each listed row of a resampled set.
fn sources(origins: &[RowOrigin], input_ids: &[usize], rows: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
    rows.into_iter().flat_map(|r| origins[r].sources()).map(|i| input_ids[i]).collect()
}

fn identity_origins(n: usize) -> Vec<RowOrigin> {
    (0..n).map(RowOrigin::Original).collect()
}

fn run_once(ds: &Dataset, cfg: &ExperimentConfig, run: usize) -> Result<RunOutput, RunError> {
    let started = Instant::now();
    let seed = run_seed(cfg.master_seed, run);
    let seeds = StageSeeds::of(seed);
    let sampler_cfg = cfg.sampler_config.clone().with_seed(seeds.sampler);
    let all: Vec<usize> = (0..ds.n_samples()).collect();

    let (train_set, test_set, audit) = match cfg.leakage_mode {
        LeakageMode::Sound => {
            let split = stratified_split(ds, cfg.train_fraction, seeds.split)?;
            let (resampled, origins) = match cfg.sampler {
                Some(kind) => {
                    let r = resample(kind, &split.train, &sampler_cfg)?;
                    let o = r.origins(split.train.n_samples());
                    (r.dataset, o)
                }
                None => (split.train.clone(), identity_origins(split.train.n_samples())),
            };
            let test_src: BTreeSet<usize> = split.test_indices.iter().copied().collect();
            let sampler_src: BTreeSet<usize> = split.train_indices.iter().copied().collect();
            let norm_src = sources(&origins, &split.train_indices, 0..resampled.n_samples());
            let audit = LeakageAudit {
                sampler_input_rows: split.train_indices.len(),
                normalizer_input_rows: resampled.n_samples(),
                test_rows: split.test_indices.len(),
                sampler_overlap: sampler_src.intersection(&test_src).count(),
                normalizer_overlap: norm_src.intersection(&test_src).count(),
            };
            let params = fit_minmax(&resampled);
            (apply_minmax(&params, &resampled)?, apply_minmax(&params, &split.test)?, audit)
        }
        LeakageMode::Paper => {
            let (resampled, origins) = match cfg.sampler {
                Some(kind) => {
                    let r = resample(kind, ds, &sampler_cfg)?;
                    let o = r.origins(ds.n_samples());
                    (r.dataset, o)
                }
                None => (ds.clone(), identity_origins(ds.n_samples())),
            };
            let params = fit_minmax(&resampled);
            let normalized = apply_minmax(&params, &resampled)?;
            let split = stratified_split(&normalized, cfg.train_fraction, seeds.split)?;
            let test_src = sources(&origins, &all, split.test_indices.iter().copied());
            let sampler_src: BTreeSet<usize> = all.iter().copied().collect();
            let norm_src = sources(&origins, &all, 0..resampled.n_samples());
            let audit = LeakageAudit {
                sampler_input_rows: ds.n_samples(),
                normalizer_input_rows: resampled.n_samples(),
                test_rows: split.test_indices.len(),
                sampler_overlap: sampler_src.intersection(&test_src).count(),
                normalizer_overlap: norm_src.intersection(&test_src).count(),
            };
            (split.train, split.test, audit)
        }
    };

    let spec = ModelSpec::new(cfg.model, ds.n_features());
    let (model, history) = train(&spec, &train_set, &cfg.train, seeds.model)?;
    let scores = predict_proba(&model, &test_set)?;
    let (confusion, metrics, roc) = evaluate(test_set.labels(), &scores, 0.5)?;
    let wall_ms = if cfg.record_timing { started.elapsed().as_millis() as u64 } else { 0 };
    log::info!("run {run}: accuracy {:?} auc {:?}", metrics.accuracy, metrics.auc);
    Ok(RunOutput {
        result: RunResult {
            run,
            seed,
            confusion,
            metrics: metrics.into(),
            final_loss: history.last().copied(),
            wall_ms,
        },
        roc,
        audit,
        model,
    })
}

fn echo(cfg: &ExperimentConfig, dataset_name: String) -> ConfigEcho {
    ConfigEcho {
        dataset: dataset_name,
        sampler: cfg.sampler,
        sampler_config: cfg.sampler_config.clone(),
        model: cfg.model,
        train: cfg.train.clone(),
        runs: cfg.runs,
        train_fraction: cfg.train_fraction,
        master_seed: cfg.master_seed,
        leakage_mode: cfg.leakage_mode,
        notes: vec![
            "resampling is repeated independently in every run".into(),
            "hard labels use probability >= 0.5; AUC uses the full score sweep".into(),
            "kappa chance agreement comes from the confusion-matrix marginals".into(),
            "sampler_config.seed is replaced by a per-run derived seed".into(),
        ],
    }
}

/// Runs the experiment on an already loaded dataset.
pub fn run_experiment_on(ds: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentOutcome, BenchError> {
    cfg.validate()?;
    let job = |run: usize| run_once(ds, cfg, run).map_err(|source| BenchError::Run { run, source });
    let outputs: Vec<Result<RunOutput, BenchError>> = if cfg.parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallel)
            .build()
            .map_err(|e| BenchError::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| (0..cfg.runs).into_par_iter().map(job).collect())
    } else {
        (0..cfg.runs).map(job).collect()
    };
    // first failure in run order, independent of scheduling
    let outputs = outputs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut best = 0;
    for (i, o) in outputs.iter().enumerate() {
        let auc = o.result.metrics.auc.value.unwrap_or(f64::NEG_INFINITY);
        if auc > outputs[best].result.metrics.auc.value.unwrap_or(f64::NEG_INFINITY) {
            best = i;
        }
    }
    let results: Vec<RunResult> = outputs.iter().map(|o| o.result.clone()).collect();
    let report = AggregateReport {
        schema_version: SCHEMA_VERSION,
        config: echo(cfg, cfg.dataset.display().to_string()),
        aggregate: summarize(&results),
        runs: results,
        roc_best_auc: outputs[best].roc.iter().map(|p| [p.fpr, p.tpr]).collect(),
    };
    let audits = outputs.iter().map(|o| o.audit.clone()).collect();
    let best_model = outputs.into_iter().nth(best).map(|o| o.model).expect("runs >= 1");
    Ok(ExperimentOutcome { report, audits, best_model })
}

/// Loads `cfg.dataset` and runs the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, BenchError> {
    cfg.validate()?;
    let ds = Dataset::load(&cfg.dataset, None)?;
    run_experiment_on(&ds, cfg)
}
