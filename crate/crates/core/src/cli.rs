//! The `imbkit` command line. Exit codes: 0 success, 1 invalid input or
//! flags, 2 failure while running.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{
    emit_report, run_experiment, summarize_matrix, BenchError, CellOutcome, ExperimentConfig,
    LeakageMode, MatrixRow, ReportFormat,
};
use crate::dataset::{imbalance_ratio, serialize_keel, write_csv, Dataset, LabelColumn};
use crate::metrics::{evaluate, KappaBand, MetricsReport, METRIC_NAMES};
use crate::nn::{LossKind, ModelKind, TrainConfig};
use crate::resampling::{resample, SamplerConfig, SamplerKind};

pub const SEED_ENV: &str = "IMB_SEED";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or unreadable input; exit 1.
    Invalid(String),
    /// Failure after the inputs were accepted; exit 2.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Invalid(_) => 1,
            Self::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Invalid(m) | Self::Runtime(m) => m,
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::InvalidConfig(_) | BenchError::Dataset(_) => Self::Invalid(e.to_string()),
            _ => Self::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "imbkit", version, about = "Resampling and neural classifiers for imbalanced binary data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print attribute count, sample count and imbalance ratio of datasets.
    Inspect(InspectArgs),
    /// Apply one sampler and write the resampled dataset.
    Resample(ResampleArgs),
    /// Score a CSV of `label,score` rows.
    Metrics(MetricsArgs),
    /// Repeated train/evaluate runs on one dataset.
    Run(RunArgs),
    /// Run every dataset x sampler x model cell and summarize.
    Matrix(MatrixArgs),
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    /// Class column for CSV inputs (name or 0-based index; default last).
    #[arg(long)]
    pub label_column: Option<LabelColumn>,
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    #[arg(long, default_value_t = 5)]
    pub smote_k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub target_ratio: f64,
    #[arg(long, default_value_t = 3)]
    pub nearmiss_m: usize,
    #[arg(long, default_value_t = 3)]
    pub nearmiss3_per_minority: usize,
}

impl SamplerArgs {
    fn config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            smote_k: self.smote_k,
            nearmiss_m: self.nearmiss_m,
            nearmiss3_per_minority: self.nearmiss3_per_minority,
            target_ratio: self.target_ratio,
            ..SamplerConfig::default()
        }
        .with_seed(seed)
    }
}

#[derive(Debug, Args)]
pub struct ResampleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub sampler: SamplerKind,
    /// Output path; `.csv` writes CSV, anything else KEEL.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub label_column: Option<LabelColumn>,
    #[command(flatten)]
    pub sampler_args: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// CSV with `label` (0/1) and `score` columns.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value = "json")]
    pub format: MetricsFormat,
    /// Also write the ROC points as `fpr,tpr` CSV.
    #[arg(long)]
    pub roc_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MetricsFormat {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value = "focal")]
    pub loss: LossKind,
    #[arg(long, default_value_t = 0.25)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Master seed; falls back to $IMB_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "sound")]
    pub leakage_mode: LeakageMode,
    /// Worker threads for independent runs. Results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    /// Record per-run wall time (makes reports differ between executions).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub sampler_args: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// ros, rus, smote, tl, oss, nearmiss1, nearmiss2, nearmiss3 or none.
    #[arg(long)]
    pub sampler: SamplerChoice,
    #[arg(long)]
    pub model: ModelKind,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    pub format: ReportFormat,
    /// Write the best-AUC run's model as JSON.
    #[arg(long)]
    pub save_model: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// Glob pattern(s) selecting dataset files.
    #[arg(long, required = true, num_args = 1..)]
    pub datasets: Vec<String>,
    /// Comma-separated sampler names (`none` allowed).
    #[arg(long, value_delimiter = ',', required = true)]
    pub samplers: Vec<SamplerChoice>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub models: Vec<ModelKind>,
    /// Directory receiving per-cell reports and the summary.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "json")]
    pub format: ReportFormat,
    #[command(flatten)]
    pub train: TrainArgs,
}

/// A sampler name or `none`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerChoice(pub Option<SamplerKind>);

impl std::str::FromStr for SamplerChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("none") {
            Ok(Self(None))
        } else {
            s.parse().map(|k| Self(Some(k)))
        }
    }
}

fn sampler_name(s: Option<SamplerKind>) -> &'static str {
    s.map_or("none", SamplerKind::as_str)
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Invalid(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn load(path: &Path, label: Option<LabelColumn>) -> Result<Dataset, CliError> {
    Dataset::load(path, label).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn out_err(e: std::io::Error) -> CliError {
    CliError::Runtime(format!("writing output: {e}"))
}

fn display_name(path: &Path, ds: &Dataset) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| ds.name.clone())
}

/// One line per dataset: name, attributes, samples, ratio, class counts.
pub fn cmd_inspect(args: &InspectArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut failures = Vec::new();
    for path in &args.paths {
        match load(path, args.label_column.clone()) {
            Ok(ds) => writeln!(
                out,
                "{}  {}  {}  {:.2}  minority={}  majority={}",
                display_name(path, &ds),
                ds.n_source_attributes(),
                ds.n_samples(),
                imbalance_ratio(&ds),
                ds.minority_count(),
                ds.majority_count()
            )
            .map_err(out_err)?,
            Err(e) => failures.push(e.message().to_string()),
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invalid(failures.join("\n")))
    }
}

pub fn cmd_resample(args: &ResampleArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = load(&args.input, args.label_column.clone())?;
    let cfg = args.sampler_args.config(resolve_seed(args.seed)?);
    cfg.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
    let result = resample(args.sampler, &ds, &cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
    let body = if args.output.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write_csv(&result.dataset)
    } else {
        serialize_keel(&result.dataset)
    };
    write_file(&args.output, &body)?;
    let r = &result.dataset;
    writeln!(
        out,
        "{}  {} -> {} rows  minority={}  majority={}  ratio={:.2}",
        args.sampler,
        ds.n_samples(),
        r.n_samples(),
        r.count(1),
        r.count(0),
        r.count(0) as f64 / r.count(1) as f64
    )
    .map_err(out_err)
}

fn read_scores(path: &Path) -> Result<(Vec<u8>, Vec<f64>), CliError> {
    let bad = |m: String| CliError::Invalid(format!("{}: {m}", path.display()));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| bad(format!("missing column {name:?}")));
    let (li, si) = (col("label")?, col("score")?);
    let (mut labels, mut scores) = (Vec::new(), Vec::new());
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let label = match &rec[li] {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(format!("row {}: label {other:?} is not 0 or 1", line + 1))),
        };
        let score: f64 = rec[si]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| bad(format!("row {}: score {:?} is not a finite number", line + 1, &rec[si])))?;
        labels.push(label);
        scores.push(score);
    }
    Ok((labels, scores))
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn metrics_line(values: [Option<f64>; 8]) -> String {
    METRIC_NAMES.iter().zip(values).map(|(n, v)| format!("{n}={}", fmt_metric(v))).collect::<Vec<_>>().join(" ")
}

pub fn cmd_metrics(args: &MetricsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (labels, scores) = read_scores(&args.input)?;
    let (cm, report, roc) = evaluate(&labels, &scores, args.threshold).map_err(|e| CliError::Invalid(e.to_string()))?;
    if let Some(path) = &args.roc_csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["fpr", "tpr"]).expect("in-memory write");
        for p in &roc {
            w.serialize((p.fpr, p.tpr)).expect("in-memory write");
        }
        write_file(path, &String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8"))?;
    }
    match args.format {
        MetricsFormat::Json => {
            #[derive(serde::Serialize)]
            struct Out {
                confusion: crate::metrics::ConfusionMatrix,
                metrics: MetricsReport,
                kappa_band: Option<KappaBand>,
                roc: Vec<[f64; 2]>,
                threshold: f64,
            }
            let o = Out {
                confusion: cm,
                metrics: report,
                kappa_band: report.kappa_band(),
                roc: roc.iter().map(|p| [p.fpr, p.tpr]).collect(),
                threshold: args.threshold,
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&o).expect("serializes")).map_err(out_err)
        }
        MetricsFormat::Text => {
            writeln!(out, "tp={} fn={} fp={} tn={}", cm.tp, cm.fn_, cm.fp, cm.tn).map_err(out_err)?;
            writeln!(out, "{}", metrics_line(report.values())).map_err(out_err)
        }
    }
}

fn experiment(
    dataset: PathBuf,
    sampler: Option<SamplerKind>,
    model: ModelKind,
    t: &TrainArgs,
) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::new(dataset, sampler, model);
    cfg.sampler_config = t.sampler_args.config(0);
    cfg.train = TrainConfig {
        learning_rate: t.lr,
        epochs: t.epochs,
        loss: t.loss,
        focal_alpha: t.alpha,
        focal_gamma: t.gamma,
        ..TrainConfig::default()
    };
    cfg.runs = t.runs;
    cfg.train_fraction = t.train_fraction;
    cfg.master_seed = resolve_seed(t.seed)?;
    cfg.leakage_mode = t.leakage_mode;
    cfg.parallel = t.parallel;
    cfg.record_timing = t.timing;
    if t.parallel == 0 {
        return Err(CliError::Invalid("--parallel must be >= 1".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = experiment(args.dataset.clone(), args.sampler.0, args.model, &args.train)?;
    let outcome = run_experiment(&cfg)?;
    if let Some(path) = &args.report {
        emit_report(&outcome.report, args.format, path)?;
    }
    if let Some(path) = &args.save_model {
        write_file(path, &outcome.best_model.to_json())?;
    }
    writeln!(out, "{}", metrics_line(outcome.report.aggregate.means())).map_err(out_err)
}

fn expand_globs(patterns: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::new();
    for p in patterns {
        let matches = glob::glob(p).map_err(|e| CliError::Invalid(format!("bad pattern {p:?}: {e}")))?;
        let before = paths.len();
        for m in matches {
            paths.push(m.map_err(|e| CliError::Invalid(e.to_string()))?);
        }
        if paths.len() == before {
            return Err(CliError::Invalid(format!("pattern {p:?} matched no files")));
        }
    }
    paths.sort();
    paths.dedup();
    Ok(paths)
}

pub fn cmd_matrix(args: &MatrixArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let paths = expand_globs(&args.datasets)?;
    // validate the shared flags once before any work
    experiment(PathBuf::new(), None, args.models[0], &args.train)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", args.out_dir.display())))?;
    let mut cells = Vec::new();
    for path in &paths {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        for &SamplerChoice(sampler) in &args.samplers {
            for &model in &args.models {
                let cfg = experiment(path.clone(), sampler, model, &args.train)?;
                let result = run_experiment(&cfg).and_then(|o| {
                    let file = args.out_dir.join(format!("{stem}_{}_{model}.{}", sampler_name(sampler), args.format));
                    emit_report(&o.report, args.format, &file)?;
                    Ok(o.report.aggregate)
                });
                if let Err(e) = &result {
                    writeln!(err, "cell {stem}/{}/{model} failed: {e}", sampler_name(sampler)).map_err(out_err)?;
                }
                cells.push(CellOutcome { dataset: stem.clone(), sampler, model, result: result.map_err(|e| e.to_string()) });
            }
        }
    }
    let rows = summarize_matrix(&cells);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MatrixRow::csv_header()).expect("in-memory write");
    for r in &rows {
        w.write_record(r.csv_record()).expect("in-memory write");
    }
    let csv_body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
    write_file(&args.out_dir.join("summary.csv"), &csv_body)?;
    let json = serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n";
    write_file(&args.out_dir.join("summary.json"), &json)?;
    for r in &rows {
        writeln!(
            out,
            "{}+{}{}  {}",
            r.sampler,
            r.model,
            if r.best { " *" } else { "" },
            metrics_line(r.means())
        )
        .map_err(out_err)?;
    }
    let failed = cells.iter().filter(|c| c.result.is_err()).count();
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} of {} cells failed", cells.len())));
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Inspect(a) => cmd_inspect(a, out),
        Command::Resample(a) => cmd_resample(a, out),
        Command::Metrics(a) => cmd_metrics(a, out),
        Command::Run(a) => cmd_run(a, out),
        Command::Matrix(a) => cmd_matrix(a, out, err),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}
