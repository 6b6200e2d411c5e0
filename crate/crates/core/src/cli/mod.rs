//! Command-line front end: generate/prep data, train, evaluate, explain,
//! export plot data, and run the batch experiments. Every command writes a
//! manifest with config and input hashes next to its artifacts.
//!
//! Exit codes: 0 success, 1 data/model errors (with a JSON error record on
//! stderr), 2 usage errors.

pub mod manifest;

use crate::ale::{ale_curve, refinement_report, AleError};
use crate::dataset::{
    self, generate_synthetic, load_csv, preprocess, train_test_split, write_csv, DataError,
    EncodedMatrix, PrepConfig, Schema, SplitSpec, SynthCoefficients, SynthConfig,
};
use crate::experiments::{consistency_experiment, subsample_rows};
use crate::export::{
    dependence_data, force_data, importance_compare, summary_data, ExportError, ForceSort,
};
use crate::lime::{
    explain_instance, Discretizer, DiscretizerKind, KernelWidth, LimeConfig, LimeError,
};
use crate::model::{
    train_boosted, train_forest, train_logistic, train_mlp, train_svm_linear, BoostedParams,
    ForestParams, LogisticParams, MlpParams, ModelError, ModelKind, ProbMethod, ProbabilityModel,
    SvmParams,
};
use crate::shap::{summarize_background, CoalitionSpec, ShapConfig, ShapError, ShapMatrix};
use clap::{Args, Parser, Subcommand, ValueEnum};
use manifest::Manifest;
use serde_json::json;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lime(#[from] LimeError),
    #[error(transparent)]
    Shap(#[from] ShapError),
    #[error(transparent)]
    Ale(#[from] AleError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Model(_) => "model",
            CliError::Lime(_) => "lime",
            CliError::Shap(_) => "shap",
            CliError::Ale(_) => "ale",
            CliError::Export(_) => "export",
            CliError::Io(_) => "io",
            CliError::Json(_) => "json",
        }
    }
}

/// Environment variable naming the directory that relative artifact paths
/// resolve against.
pub const ARTIFACT_ROOT_ENV: &str = "CREDITLENS_ARTIFACT_ROOT";

fn resolve(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(ARTIFACT_ROOT_ENV) {
        Some(root) => PathBuf::from(root).join(path),
        None => path.to_path_buf(),
    }
}

#[derive(Parser)]
#[command(
    name = "creditlens",
    version,
    about = "Train credit-default classifiers and explain them with LIME, Kernel SHAP, and ALE curves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic loan table with a known generating process
    Synth(SynthArgs),
    /// Load a CSV, run the preprocessing pipeline, encode, and split
    Prep(PrepArgs),
    /// Train one of the five classifier kinds on an encoded split
    Train(TrainArgs),
    /// Evaluate a trained model on an encoded split
    Eval(EvalArgs),
    /// Local and global explanations
    #[command(subcommand)]
    Explain(ExplainCommand),
    /// Accumulated local effects curve for one feature
    Ale(AleArgs),
    /// Plot-ready exports from a saved attribution matrix
    #[command(subcommand)]
    Report(ReportCommand),
    /// Batch experiments
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SynthProfile {
    Default,
    RecoveriesDominant,
}

#[derive(Args)]
struct SynthArgs {
    /// Rows to generate (at least 100)
    #[arg(long, default_value_t = 5000, value_parser = clap::value_parser!(u64).range(100..))]
    rows: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth JSON path (default: <out>.truth.json)
    #[arg(long)]
    truth_out: Option<PathBuf>,
    /// Schema JSON path (default: <out>.schema.json)
    #[arg(long)]
    schema_out: Option<PathBuf>,
    /// Generating-coefficient profile
    #[arg(long, value_enum, default_value_t = SynthProfile::Default)]
    profile: SynthProfile,
}

#[derive(Args)]
struct PrepArgs {
    /// Input CSV
    #[arg(long = "input", visible_alias = "in")]
    input: PathBuf,
    /// Column-kind declarations (JSON map)
    #[arg(long)]
    schema: PathBuf,
    /// Output directory for train.json / test.json / report.json
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    sparse_threshold: Option<f64>,
    #[arg(long)]
    corr_max: Option<f64>,
    /// Chi-square significance level
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    grade_column: Option<String>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON config file with flat dotted keys; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TrainKind {
    Logistic,
    Forest,
    Boosted,
    Svm,
    Mlp,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    kind: TrainKind,
    /// Encoded training split (train.json from `prep`)
    #[arg(long)]
    train: PathBuf,
    /// Output model JSON
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// L2 penalty (logistic)
    #[arg(long)]
    l2: Option<f64>,
    /// Tree count (forest)
    #[arg(long)]
    trees: Option<usize>,
    /// Maximum depth (forest/boosted)
    #[arg(long)]
    depth: Option<usize>,
    /// Boosting rounds
    #[arg(long)]
    rounds: Option<usize>,
    /// Boosting learning rate
    #[arg(long)]
    learning_rate: Option<f64>,
    /// SVM regularization C
    #[arg(long)]
    cost: Option<f64>,
    /// SVM probability mapping: calibrated sigmoid(a*d + b) or raw sigmoid(d)
    #[arg(long)]
    svm_prob_method: Option<String>,
    /// MLP epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// MLP hidden widths, comma separated (e.g. 35,35)
    #[arg(long)]
    hidden: Option<String>,
    /// MLP mini-batch size
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Encoded split to evaluate on
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExplainCommand {
    /// Local surrogate explanation for one instance
    Lime(LimeArgs),
    /// Kernel SHAP over a batch of instances
    Shap(ShapArgs),
    /// Exact enumeration Shapley values for one instance (D <= 15)
    Exact(ExactArgs),
}

#[derive(Args)]
struct LimeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Encoded training split (fits the discretizer)
    #[arg(long)]
    train: PathBuf,
    /// Encoded split holding the instance
    #[arg(long)]
    data: PathBuf,
    /// Row index of the instance to explain
    #[arg(long)]
    instance: usize,
    #[arg(long)]
    out: PathBuf,
    /// Entries to report
    #[arg(long = "top-k", visible_alias = "k")]
    top_k: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// "auto" or a positive number
    #[arg(long)]
    kernel_width: Option<String>,
    /// quartile | none
    #[arg(long)]
    discretizer: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ShapArgs {
    #[arg(long)]
    model: PathBuf,
    /// Encoded training split (background source)
    #[arg(long)]
    train: PathBuf,
    /// Encoded split to explain
    #[arg(long)]
    data: PathBuf,
    /// Output directory (matrix.json/csv, rows.json, timing.csv, meta.json)
    #[arg(long)]
    out_dir: PathBuf,
    /// Instances to explain (seeded subsample of the data)
    #[arg(long = "rows", visible_alias = "n")]
    rows: Option<usize>,
    /// k-means centroids in the background
    #[arg(long)]
    background_k: Option<usize>,
    /// Sub-sample feeding the k-means summarization
    #[arg(long)]
    background_source: Option<usize>,
    /// "auto", "exhaustive", or a coalition count
    #[arg(long)]
    coalitions: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the row fan-out
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ExactArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    instance: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    background_k: Option<usize>,
    #[arg(long)]
    background_source: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Feature name in the encoded space
    #[arg(long)]
    feature: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    intervals: Option<usize>,
    /// Also write a CSV variant (edge, effect, count per interval)
    #[arg(long)]
    csv_out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Mean-|phi| ranking plus per-point beeswarm data
    Summary(SummaryArgs),
    /// Dependence points with the interaction partner
    Dependence(DependenceArgs),
    /// Stacked per-instance force data
    Force(ForceArgs),
    /// Information gain vs mean |phi| comparison
    Compare(CompareArgs),
}

#[derive(Args)]
struct SummaryArgs {
    /// Directory produced by `explain shap`
    #[arg(long)]
    shap_dir: PathBuf,
    /// Output directory (default: the shap directory)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    top: Option<usize>,
}

#[derive(Args)]
struct DependenceArgs {
    #[arg(long)]
    shap_dir: PathBuf,
    #[arg(long)]
    feature: String,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ForceArgs {
    #[arg(long)]
    shap_dir: PathBuf,
    /// Stack by this feature's value instead of by model output
    #[arg(long)]
    sort_feature: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    shap_dir: PathBuf,
    /// Tree-based model for the information-gain side
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    top: Option<usize>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Small-vs-large explanation batch agreement (top-n Jaccard)
    Consistency(ConsistencyArgs),
}

#[derive(Args)]
struct ConsistencyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    small: Option<usize>,
    #[arg(long)]
    large: Option<usize>,
    #[arg(long)]
    top: Option<usize>,
    #[arg(long)]
    background_k: Option<usize>,
    #[arg(long)]
    background_source: Option<usize>,
    #[arg(long)]
    coalitions: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Flat dotted-key JSON config; flags override these values, which override
/// the built-in defaults.
struct FileConfig(BTreeMap<String, serde_json::Value>);

impl FileConfig {
    fn load(path: Option<&PathBuf>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig(BTreeMap::new()));
        };
        let text = std::fs::read_to_string(resolve(path))?;
        let map: BTreeMap<String, serde_json::Value> = serde_json::from_str(&text)?;
        Ok(FileConfig(map))
    }

    fn f64(&self, key: &str) -> Option<f64> {
        self.0.get(key).and_then(|v| v.as_f64())
    }

    fn u64(&self, key: &str) -> Option<u64> {
        self.0.get(key).and_then(|v| v.as_u64())
    }

    fn usize(&self, key: &str) -> Option<usize> {
        self.u64(key).map(|v| v as usize)
    }

    fn string(&self, key: &str) -> Option<String> {
        self.0.get(key).and_then(|v| v.as_str().map(str::to_string))
    }
}

/// Parse and run; returns the process exit status.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(message)) => {
            eprintln!(
                "{}",
                json!({"error": "usage", "message": message})
            );
            2
        }
        Err(e) => {
            eprintln!(
                "{}",
                json!({"error": e.kind(), "message": e.to_string()})
            );
            1
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(args) => cmd_synth(args),
        Command::Prep(args) => cmd_prep(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Explain(ExplainCommand::Lime(args)) => cmd_lime(args),
        Command::Explain(ExplainCommand::Shap(args)) => cmd_shap(args),
        Command::Explain(ExplainCommand::Exact(args)) => cmd_exact(args),
        Command::Ale(args) => cmd_ale(args),
        Command::Report(ReportCommand::Summary(args)) => cmd_report_summary(args),
        Command::Report(ReportCommand::Dependence(args)) => cmd_report_dependence(args),
        Command::Report(ReportCommand::Force(args)) => cmd_report_force(args),
        Command::Report(ReportCommand::Compare(args)) => cmd_report_compare(args),
        Command::Bench(BenchCommand::Consistency(args)) => cmd_bench_consistency(args),
    }
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let out = resolve(&args.out);
    let truth_out = args
        .truth_out
        .map(|p| resolve(&p))
        .unwrap_or_else(|| out.with_extension("truth.json"));
    let schema_out = args
        .schema_out
        .map(|p| resolve(&p))
        .unwrap_or_else(|| out.with_extension("schema.json"));
    let coefficients = match args.profile {
        SynthProfile::Default => SynthCoefficients::default(),
        SynthProfile::RecoveriesDominant => SynthCoefficients::recoveries_dominant(),
    };
    let cfg = SynthConfig {
        rows: args.rows as usize,
        seed: args.seed,
        coefficients,
    };
    let (data, truth) = generate_synthetic(&cfg);
    ensure_parent(&out)?;
    write_csv(&data, &out)?;
    std::fs::write(&truth_out, serde_json::to_string_pretty(&truth)?)?;
    std::fs::write(
        &schema_out,
        serde_json::to_string_pretty(&dataset::synthetic_schema())?,
    )?;

    let mut manifest = Manifest::new(
        "synth",
        json!({"rows": args.rows, "seed": args.seed, "profile": format!("{:?}", args.profile)}),
    );
    manifest.record_output(&out);
    manifest.record_output(&truth_out);
    manifest.record_output(&schema_out);
    manifest.wall_seconds = started.elapsed().as_secs_f64();
    manifest.write(&out.with_extension("manifest.json"))?;
    println!("wrote {} rows to {}", args.rows, out.display());
    Ok(())
}

fn cmd_prep(args: PrepArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file_cfg = FileConfig::load(args.config.as_ref())?;
    let prep_cfg = PrepConfig {
        sparse_threshold: args
            .sparse_threshold
            .or(file_cfg.f64("prep.sparse_threshold"))
            .unwrap_or(0.9),
        corr_max: args.corr_max.or(file_cfg.f64("prep.corr_max")).unwrap_or(0.9),
        chi_alpha: args.alpha.or(file_cfg.f64("prep.alpha")).unwrap_or(0.05),
        grade_column: args
            .grade_column
            .or(file_cfg.string("prep.grade_column"))
            .unwrap_or_else(|| "grade".to_string()),
    };
    let split = SplitSpec {
        test_fraction: args
            .test_fraction
            .or(file_cfg.f64("prep.test_fraction"))
            .unwrap_or(0.2),
        seed: args.seed.or(file_cfg.u64("prep.seed")).unwrap_or(42),
    };

    let input = resolve(&args.input);
    let schema_path = resolve(&args.schema);
    let schema = Schema::from_json(&std::fs::read_to_string(&schema_path)?)?;
    let data = load_csv(&input, &schema)?;
    let (encoded, report) = preprocess(data, &prep_cfg)?;
    let (train, test) = train_test_split(&encoded, &split)?;

    let out_dir = resolve(&args.out_dir);
    std::fs::create_dir_all(&out_dir)?;
    let train_path = out_dir.join("train.json");
    let test_path = out_dir.join("test.json");
    let report_path = out_dir.join("report.json");
    train.save_json(&train_path)?;
    test.save_json(&test_path)?;
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;

    let mut manifest = Manifest::new(
        "prep",
        json!({
            "sparse_threshold": prep_cfg.sparse_threshold,
            "corr_max": prep_cfg.corr_max,
            "alpha": prep_cfg.chi_alpha,
            "grade_column": prep_cfg.grade_column,
            "test_fraction": split.test_fraction,
            "seed": split.seed,
        }),
    );
    manifest.record_input(&input)?;
    manifest.record_input(&schema_path)?;
    manifest.record_output(&train_path);
    manifest.record_output(&test_path);
    manifest.record_output(&report_path);
    manifest.wall_seconds = started.elapsed().as_secs_f64();
    manifest.write(&out_dir.join("manifest.json"))?;
    println!(
        "encoded {} train rows / {} test rows, {} features",
        train.n_rows(),
        test.n_rows(),
        train.n_features()
    );
    Ok(())
}

fn parse_hidden(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("bad hidden widths `{text}`")))
        })
        .collect()
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file_cfg = FileConfig::load(args.config.as_ref())?;
    let train_path = resolve(&args.train);
    let data = EncodedMatrix::load_json(&train_path)?;
    let seed = args.seed.or(file_cfg.u64("train.seed")).unwrap_or(42);

    let (kind, config_json) = match args.kind {
        TrainKind::Logistic => {
            let params = LogisticParams {
                l2: args.l2.or(file_cfg.f64("train.l2")).unwrap_or(1.0),
                ..Default::default()
            };
            let m = train_logistic(&data.x, &data.y, &params)?;
            (ModelKind::Logistic(m), json!({"kind": "logistic", "l2": params.l2, "seed": seed}))
        }
        TrainKind::Forest => {
            let params = ForestParams {
                n_trees: args.trees.or(file_cfg.usize("train.trees")).unwrap_or(500),
                max_depth: args.depth.or(file_cfg.usize("train.depth")).unwrap_or(20),
                bootstrap: true,
                seed,
            };
            let m = train_forest(&data.x, &data.y, &params)?;
            (
                ModelKind::Forest(m),
                json!({"kind": "forest", "trees": params.n_trees, "depth": params.max_depth, "seed": seed}),
            )
        }
        TrainKind::Boosted => {
            let params = BoostedParams {
                n_rounds: args.rounds.or(file_cfg.usize("train.rounds")).unwrap_or(100),
                max_depth: args.depth.or(file_cfg.usize("train.depth")).unwrap_or(4),
                learning_rate: args
                    .learning_rate
                    .or(file_cfg.f64("train.learning_rate"))
                    .unwrap_or(0.1),
                seed,
            };
            let m = train_boosted(&data.x, &data.y, &params)?;
            (
                ModelKind::Boosted(m),
                json!({"kind": "boosted", "rounds": params.n_rounds, "depth": params.max_depth, "learning_rate": params.learning_rate, "seed": seed}),
            )
        }
        TrainKind::Svm => {
            let params = SvmParams {
                c: args.cost.or(file_cfg.f64("train.cost")).unwrap_or(1.0),
                seed,
                ..Default::default()
            };
            let method = match args
                .svm_prob_method
                .or(file_cfg.string("train.svm_prob_method"))
                .as_deref()
            {
                None | Some("calibrated") => ProbMethod::Calibrated,
                Some("raw") => ProbMethod::RawSigmoid,
                Some(other) => {
                    return Err(CliError::Usage(format!(
                        "bad svm probability method `{other}` (calibrated|raw)"
                    )))
                }
            };
            let mut m = train_svm_linear(&data.x, &data.y, &params)?;
            m.default_method = method;
            (
                ModelKind::SvmLinear(m),
                json!({"kind": "svm", "cost": params.c, "prob_method": format!("{method:?}"), "seed": seed}),
            )
        }
        TrainKind::Mlp => {
            let hidden = match args.hidden.or(file_cfg.string("train.hidden")) {
                Some(text) => parse_hidden(&text)?,
                None => vec![35, 35],
            };
            let params = MlpParams {
                hidden: hidden.clone(),
                learning_rate: args
                    .learning_rate
                    .or(file_cfg.f64("train.learning_rate"))
                    .unwrap_or(1e-3),
                batch_size: args
                    .batch_size
                    .or(file_cfg.usize("train.batch_size"))
                    .unwrap_or(128),
                epochs: args.epochs.or(file_cfg.usize("train.epochs")).unwrap_or(20),
                seed,
            };
            let m = train_mlp(&data.x, &data.y, &params)?;
            (
                ModelKind::Mlp(m),
                json!({"kind": "mlp", "hidden": hidden, "learning_rate": params.learning_rate, "batch_size": params.batch_size, "epochs": params.epochs, "seed": seed}),
            )
        }
    };

    let model = ProbabilityModel::new(data.names.clone(), kind);
    let out = resolve(&args.out);
    ensure_parent(&out)?;
    model.save(&out)?;

    let mut manifest = Manifest::new("train", config_json);
    manifest.record_input(&train_path)?;
    manifest.record_output(&out);
    manifest.wall_seconds = started.elapsed().as_secs_f64();
    manifest.write(&out.with_extension("manifest.json"))?;
    println!("trained {} model -> {}", model.kind_name(), out.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file_cfg = FileConfig::load(args.config.as_ref())?;
    let threshold = args
        .threshold
        .or(file_cfg.f64("eval.threshold"))
        .unwrap_or(0.5);
    let model_path = resolve(&args.model);
    let data_path = resolve(&args.data);
    let model = ProbabilityModel::load(&model_path)?;
    let data = EncodedMatrix::load_json(&data_path)?;
    let metrics = model.evaluate(&data.x, &data.y, threshold)?;

    let out = resolve(&args.out);
    ensure_parent(&out)?;
    std::fs::write(&out, serde_json::to_string_pretty(&metrics)?)?;
    let mut manifest = Manifest::new("eval", json!({"threshold": threshold}));
    manifest.record_input(&model_path)?;
    manifest.record_input(&data_path)?;
    manifest.record_output(&out);
    manifest.wall_seconds = started.elapsed().as_secs_f64();
    manifest.write(&out.with_extension("manifest.json"))?;
    println!(
        "accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  auc {:.4}",
        metrics.accuracy, metrics.precision, metrics.recall, metrics.f1, metrics.roc_auc
    );
    Ok(())
}

fn parse_kernel_width(text: &str) -> Result<KernelWidth, CliError> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(KernelWidth::Auto);
    }
    match text.parse::<f64>() {
        Ok(v) if v > 0.0 => Ok(KernelWidth::Fixed(v)),
        _ => Err(CliError::Usage(format!("bad kernel width `{text}`"))),
    }
}

fn parse_discretizer(text: &str) -> Result<DiscretizerKind, CliError> {
    match text.to_ascii_lowercase().as_str() {
        "quartile" => Ok(DiscretizerKind::Quartile),
        "none" => Ok(DiscretizerKind::None),
        other => Err(CliError::Usage(format!("bad discretizer `{other}`"))),
    }
}

fn parse_coalitions(text: &str) -> Result<CoalitionSpec, CliError> {
    match text.to_ascii_lowercase().as_str() {
        "auto" => Ok(CoalitionSpec::Auto),
        "exhaustive" => Ok(CoalitionSpec::Exhaustive),
        other => match other.parse::<usize>() {
            Ok(n) if n >= 2 => Ok(CoalitionSpec::Sampled(n)),
            _ => Err(CliError::Usage(format!("bad coalition spec `{text}`"))),
        },
    }
}

fn cmd_lime(args: LimeArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file_cfg = FileConfig::load(args.config.as_ref())?;
    let cfg = LimeConfig {
        n_samples: args.samples.or(file_cfg.usize("lime.samples")).unwrap_or(5000),
        top_k: args.top_k.or(file_cfg.usize("lime.top_k")).unwrap_or(10),
        kernel_width: match args.kernel_width.or(file_cfg.string("lime.kernel_width")) {
            Some(text) => parse_kernel_width(&text)?,
            None => KernelWidth::Auto,
        },
        discretizer: match args.discretizer.or(file_cfg.string("lime.discretizer")) {
            Some(text) => parse_discretizer(&text)?,
            None => DiscretizerKind::Quartile,
        },
        ridge_penalty: file_cfg.f64("lime.ridge_penalty").unwrap_or(1.0),
        seed: args.seed.or(file_cfg.u64("lime.seed")).unwrap_or(42),
    };

    let model_path = resolve(&args.model);
    let train_path = resolve(&args.train);
    let data_path = resolve(&args.data);
    let model = ProbabilityModel::load(&model_path)?;
    let train = EncodedMatrix::load_json(&train_path)?;
    let data = EncodedMatrix::load_json(&data_path)?;
    if args.instance >= data.n_rows() {
        return Err(CliError::Usage(format!(
            "instance {} out of range ({} rows)",
            args.instance,
            data.n_rows()
        )));
    }
    let disc = match cfg.discretizer {
        DiscretizerKind::Quartile => Discretizer::fit_quartile(&train.x),
        DiscretizerKind::None => Discretizer::fit_raw(&train.x),
    };
    let x = data.x.row(args.instance).to_vec();
    let explanation = explain_instance(&model, &x, args.instance, &data.names, &disc, &cfg)?;

    let out = resolve(&args.out);
    ensure_parent(&out)?;
    std::fs::write(&out, serde_json::to_string_pretty(&explanation)?)?;

    // aligned two-column table, conditions then signed weights
    let width = explanation
        .entries
        .iter()
        .map(|e| e.condition.len())
        .max()
        .unwrap_or(0);
    println!(
        "instance {}  predicted: {}  p(default) = {:.4}",
        explanation.instance_id,
        if explanation.predicted_class == 1 { "Default" } else { "Fully Paid" },
        explanation.class_probabilities[1]
    );
    for entry in &explanation.entries {
        println!("  {:width$}  {:+.4}", entry.condition, entry.weight);
    }

    let mut manifest = Manifest::new(
        "explain-lime",
        json!({
            "instance": args.instance,
            "samples": cfg.n_samples,
            "top_k": cfg.top_k,
            "discretizer": format!("{:?}", cfg.discretizer),
            "seed": cfg.seed,
        }),
    );
    manifest.record_input(&model_path)?;
    manifest.record_input(&train_path)?;
    manifest.record_input(&data_path)?;
    manifest.record_output(&out);
    manifest.wall_seconds = started.elapsed().as_secs_f64();
    manifest.write(&out.with_extension("manifest.json"))?;
    Ok(())
}

/// Sidecar describing a shap output directory, consumed by `report`.
#[derive(serde::Serialize, serde::Deserialize)]
struct ShapMeta {
    model_kind: String,
    explainer: String,
    rows: usize,
    seed: u64,
    coalitions: String,
    background: crate::shap::BackgroundProvenance,
}

fn cmd_shap(args: ShapArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file_cfg = FileConfig::load(args.config.as_ref())?;
    let rows = args.rows.or(file_cfg.usize("shap.rows")).unwrap_or(100);
    let background_k = args
        .background_k
        .or(file_cfg.usize("shap.background_k"))
        .unwrap_or(30);
    let background_source = args
        .background_source
        .or(file_cfg.usize("shap.background_source"))
        .unwrap_or(20_000);
    let coalitions_text = args
        .coalitions
        .or(file_cfg.string("shap.coalitions"))
        .unwrap_or_else(|| "auto".to_string());
    let cfg = ShapConfig {
        coalitions: parse_coalitions(&coalitions_text)?,
        seed: args.seed.or(file_cfg.u64("shap.seed")).unwrap_or(42),
        jobs: args.jobs.or(file_cfg.usize("shap.jobs")).unwrap_or(1),
        progress: true,
    };

    let model_path = resolve(&args.model);
    let train_path = resolve(&args.train);
    let data_path = resolve(&args.data);
    let model = ProbabilityModel::load(&model_path)?;
    let train = EncodedMatrix::load_json(&train_path)?;
    let data = EncodedMatrix::load_json(&data_path)?;

    let bg = summarize_background(&train.x, background_k, background_source, cfg.seed)?;
    let explain_rows = subsample_rows(&data.x, rows, cfg.seed);
    let sm = crate::shap::shap_matrix(&model, &explain_rows, &bg, &data.names, &cfg)?;

    let out_dir = resolve(&args.out_dir);
    std::fs::create_dir_all(&out_dir)?;
    let matrix_json = out_dir.join("matrix.json");
    let matrix_csv = out_dir.join("matrix.csv");
    let rows_json = out_dir.join("rows.json");
    let timing_csv = out_dir.join("timing.csv");
    let meta_json = out_dir.join("meta.json");
    sm.save_json(&matrix_json)?;
    sm.save_csv(&matrix_csv)?;
    std::fs::write(&rows_json, serde_json::to_string(&explain_rows)?)?;
    let mut timing = String::from("row,seconds\n");
    for (i, s) in sm.row_seconds.iter().enumerate() {
        timing.push_str(&format!("{i},{s}\n"));
    }
    std::fs::write(&timing_csv, timing)?;
    std::fs::write(
        &meta_json,
        serde_json::to_string_pretty(&ShapMeta {
            model_kind: model.kind_name().to_string(),
            explainer: "shap".to_string(),
            rows: sm.n_rows(),
            seed: cfg.seed,
            coalitions: coalitions_text.clone(),
            background: bg.provenance.clone(),
        })?,
    )?;

    // every exported row must satisfy local accuracy
    for (i, r) in sm.results.iter().enumerate() {
        let gap = r.local_accuracy_gap();
        if gap > 1e-6 {
            eprintln!("row {i} violates local accuracy by {gap}");
            return Err(CliError::Shap(ShapError::SingularSystem));
        }
    }

    let mut manifest = Manifest::new(
        "explain-shap",
        json!({
            "rows": rows,
            "background_k": background_k,
            "background_source": background_source,
            "coalitions": coalitions_text,
            "seed": cfg.seed,
            "jobs": cfg.jobs,
        }),
    );
    manifest.record_input(&model_path)?;
    manifest.record_input(&train_path)?;
    manifest.record_input(&data_path)?;
    for p in [&matrix_json, &matrix_csv, &rows_json, &timing_csv, &meta_json] {
        manifest.record_output(p);
    }
    manifest.wall_seconds = started.elapsed().as_secs_f64();
    manifest.write(&out_dir.join("manifest.json"))?;
    println!(
        "explained {} rows in {:.2}s -> {}",
        sm.n_rows(),
        started.elapsed().as_secs_f64(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_exact(args: ExactArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file_cfg = FileConfig::load(args.config.as_ref())?;
    let background_k = args
        .background_k
        .or(file_cfg.usize("shap.background_k"))
        .unwrap_or(30);
    let background_source = args
        .background_source
        .or(file_cfg.usize("shap.background_source"))
        .unwrap_or(20_000);
    let seed = args.seed.or(file_cfg.u64("shap.seed")).unwrap_or(42);

    let model_path = resolve(&args.model);
    let train_path = resolve(&args.train);
    let data_path = resolve(&args.data);
    let model = ProbabilityModel::load(&model_path)?;
    let train = EncodedMatrix::load_json(&train_path)?;
    let data = EncodedMatrix::load_json(&data_path)?;
    if args.instance >= data.n_rows() {
        return Err(CliError::Usage(format!(
            "instance {} out of range ({} rows)",
            args.instance,
            data.n_rows()
        )));
    }
    let bg = summarize_background(&train.x, background_k, background_source, seed)?;
    let result = crate::shap::exact_shapley(&model, data.x.row(args.instance), &bg)?;

    let out = resolve(&args.out);
    ensure_parent(&out)?;
    std::fs::write(
        &out,
        serde_json::to_string_pretty(&json!({
            "instance": args.instance,
            "feature_names": data.names,
            "phi": result.phi,
            "base_value": result.base_value,
            "fx": result.fx,
        }))?,
    )?;
    let mut manifest = Manifest::new(
        "explain-exact",
        json!({"instance": args.instance, "background_k": background_k, "seed": seed}),
    );
    manifest.record_input(&model_path)?;
    manifest.record_input(&train_path)?;
    manifest.record_input(&data_path)?;
    manifest.record_output(&out);
    manifest.wall_seconds = started.elapsed().as_secs_f64();
    manifest.write(&out.with_extension("manifest.json"))?;
    println!(
        "exact shapley: base {:.6} fx {:.6} -> {}",
        result.base_value,
        result.fx,
        out.display()
    );
    Ok(())
}

fn cmd_ale(args: AleArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file_cfg = FileConfig::load(args.config.as_ref())?;
    let intervals = args
        .intervals
        .or(file_cfg.usize("ale.intervals"))
        .unwrap_or(20);
    let model_path = resolve(&args.model);
    let data_path = resolve(&args.data);
    let model = ProbabilityModel::load(&model_path)?;
    let data = EncodedMatrix::load_json(&data_path)?;
    let feature = data
        .feature_index(&args.feature)
        .ok_or_else(|| CliError::Usage(format!("unknown feature `{}`", args.feature)))?;

    let curve = ale_curve(&model, &data.x, feature, &args.feature, intervals)?;
    let refinement = refinement_report(&model, &data.x, feature, &args.feature, intervals).ok();

    let out = resolve(&args.out);
    ensure_parent(&out)?;
    std::fs::write(
        &out,
        serde_json::to_string_pretty(&json!({"curve": curve, "refinement": refinement}))?,
    )?;
    if let Some(csv_path) = &args.csv_out {
        let csv_path = resolve(csv_path);
        let mut text = String::from("edge,effect,count\n");
        text.push_str(&format!("{},{},\n", curve.edges[0], curve.anchor()));
        for i in 0..curve.effects.len() {
            text.push_str(&format!(
                "{},{},{}\n",
                curve.edges[i + 1],
                curve.effects[i],
                curve.counts[i]
            ));
        }
        std::fs::write(&csv_path, text)?;
    }
    let mut manifest = Manifest::new(
        "ale",
        json!({"feature": args.feature, "intervals": intervals}),
    );
    manifest.record_input(&model_path)?;
    manifest.record_input(&data_path)?;
    manifest.record_output(&out);
    manifest.wall_seconds = started.elapsed().as_secs_f64();
    manifest.write(&out.with_extension("manifest.json"))?;
    println!(
        "ale curve for {} ({} intervals) -> {}",
        args.feature,
        curve.effects.len(),
        out.display()
    );
    Ok(())
}

struct ShapDir {
    matrix: ShapMatrix,
    rows: crate::util::matrix::Matrix,
    meta: ShapMeta,
    dir: PathBuf,
}

fn load_shap_dir(dir: &Path) -> Result<ShapDir, CliError> {
    let dir = resolve(dir);
    let matrix = ShapMatrix::load_json(&dir.join("matrix.json"))?;
    let rows: crate::util::matrix::Matrix =
        serde_json::from_str(&std::fs::read_to_string(dir.join("rows.json"))?)?;
    let meta: ShapMeta =
        serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)?;
    Ok(ShapDir {
        matrix,
        rows,
        meta,
        dir,
    })
}

fn report_path(
    sd: &ShapDir,
    out_dir: Option<&PathBuf>,
    view: &str,
    ext: &str,
) -> Result<PathBuf, CliError> {
    let dir = out_dir.map(|p| resolve(p)).unwrap_or_else(|| sd.dir.clone());
    std::fs::create_dir_all(&dir)?;
    Ok(dir.join(format!(
        "{}_{}_{view}.{ext}",
        sd.meta.model_kind, sd.meta.explainer
    )))
}

fn cmd_report_summary(args: SummaryArgs) -> Result<(), CliError> {
    let sd = load_shap_dir(&args.shap_dir)?;
    let top = args.top.unwrap_or(20);
    let summary = summary_data(&sd.matrix, &sd.rows, top)?;
    let json_path = report_path(&sd, args.out_dir.as_ref(), "summary", "json")?;
    let csv_path = report_path(&sd, args.out_dir.as_ref(), "summary", "csv")?;
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary)?)?;
    let mut csv = String::from("feature,mean_abs_phi\n");
    for f in &summary.features {
        csv.push_str(&format!("{},{}\n", f.feature, f.mean_abs_phi));
    }
    std::fs::write(&csv_path, csv)?;
    println!("summary -> {}", json_path.display());
    Ok(())
}

fn cmd_report_dependence(args: DependenceArgs) -> Result<(), CliError> {
    let sd = load_shap_dir(&args.shap_dir)?;
    let feature = sd
        .matrix
        .feature_names
        .iter()
        .position(|n| n == &args.feature)
        .ok_or_else(|| CliError::Usage(format!("unknown feature `{}`", args.feature)))?;
    let dep = dependence_data(&sd.matrix, &sd.rows, feature)?;
    let json_path = report_path(&sd, args.out_dir.as_ref(), "dependence", "json")?;
    let csv_path = report_path(&sd, args.out_dir.as_ref(), "dependence", "csv")?;
    std::fs::write(&json_path, serde_json::to_string_pretty(&dep)?)?;
    let mut csv = String::from("x_j,phi_j,x_partner\n");
    for p in &dep.points {
        csv.push_str(&format!("{},{},{}\n", p.x_j, p.phi_j, p.x_partner));
    }
    std::fs::write(&csv_path, csv)?;
    println!(
        "dependence for {} (partner {}) -> {}",
        dep.feature,
        dep.partner,
        json_path.display()
    );
    Ok(())
}

fn cmd_report_force(args: ForceArgs) -> Result<(), CliError> {
    let sd = load_shap_dir(&args.shap_dir)?;
    let sort = match &args.sort_feature {
        None => ForceSort::ByOutput,
        Some(name) => {
            let feature = sd
                .matrix
                .feature_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| CliError::Usage(format!("unknown feature `{name}`")))?;
            ForceSort::ByFeature { feature }
        }
    };
    let force = force_data(&sd.matrix, &sd.rows, sort)?;
    let json_path = report_path(&sd, args.out_dir.as_ref(), "force", "json")?;
    let csv_path = report_path(&sd, args.out_dir.as_ref(), "force", "csv")?;
    std::fs::write(&json_path, serde_json::to_string_pretty(&force)?)?;
    let mut csv = String::from("instance,sort_value,base_value,fx,feature,phi\n");
    for inst in &force.instances {
        for c in &inst.contributions {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                inst.instance, inst.sort_value, inst.base_value, inst.fx, c.feature, c.phi
            ));
        }
    }
    std::fs::write(&csv_path, csv)?;
    println!("force data ({} instances) -> {}", force.instances.len(), json_path.display());
    Ok(())
}

fn cmd_report_compare(args: CompareArgs) -> Result<(), CliError> {
    let sd = load_shap_dir(&args.shap_dir)?;
    let model = ProbabilityModel::load(&resolve(&args.model))?;
    let gain = model.information_gain_importance()?;
    let top = args.top.unwrap_or(20);
    let cmp = importance_compare(&gain, &sd.matrix, top)?;
    let json_path = report_path(&sd, args.out_dir.as_ref(), "compare", "json")?;
    let csv_path = report_path(&sd, args.out_dir.as_ref(), "compare", "csv")?;
    std::fs::write(&json_path, serde_json::to_string_pretty(&cmp)?)?;
    let mut csv = String::from("feature,gain,mean_abs_phi\n");
    for row in &cmp.rows {
        csv.push_str(&format!("{},{},{}\n", row.feature, row.gain, row.mean_abs_phi));
    }
    std::fs::write(&csv_path, csv)?;
    println!(
        "importance comparison (jaccard@{} = {:.3}) -> {}",
        top,
        cmp.jaccard_top_n,
        json_path.display()
    );
    Ok(())
}

fn cmd_bench_consistency(args: ConsistencyArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file_cfg = FileConfig::load(args.config.as_ref())?;
    let small = args.small.or(file_cfg.usize("bench.small")).unwrap_or(100);
    let large = args.large.or(file_cfg.usize("bench.large")).unwrap_or(2000);
    let top = args.top.or(file_cfg.usize("bench.top")).unwrap_or(20);
    let background_k = args
        .background_k
        .or(file_cfg.usize("shap.background_k"))
        .unwrap_or(30);
    let background_source = args
        .background_source
        .or(file_cfg.usize("shap.background_source"))
        .unwrap_or(20_000);
    let coalitions_text = args
        .coalitions
        .or(file_cfg.string("shap.coalitions"))
        .unwrap_or_else(|| "auto".to_string());
    let cfg = ShapConfig {
        coalitions: parse_coalitions(&coalitions_text)?,
        seed: args.seed.or(file_cfg.u64("shap.seed")).unwrap_or(42),
        jobs: args.jobs.or(file_cfg.usize("shap.jobs")).unwrap_or(1),
        progress: true,
    };

    let model_path = resolve(&args.model);
    let train_path = resolve(&args.train);
    let data_path = resolve(&args.data);
    let model = ProbabilityModel::load(&model_path)?;
    let train = EncodedMatrix::load_json(&train_path)?;
    let data = EncodedMatrix::load_json(&data_path)?;
    let bg = summarize_background(&train.x, background_k, background_source, cfg.seed)?;
    let report =
        consistency_experiment(&model, &data.x, &data.names, &bg, small, large, top, &cfg)?;

    let out = resolve(&args.out);
    ensure_parent(&out)?;
    std::fs::write(&out, serde_json::to_string_pretty(&report)?)?;
    let mut manifest = Manifest::new(
        "bench-consistency",
        json!({
            "small": small, "large": large, "top": top,
            "background_k": background_k, "background_source": background_source,
            "coalitions": coalitions_text, "seed": cfg.seed, "jobs": cfg.jobs,
        }),
    );
    manifest.record_input(&model_path)?;
    manifest.record_input(&train_path)?;
    manifest.record_input(&data_path)?;
    manifest.record_output(&out);
    manifest.wall_seconds = started.elapsed().as_secs_f64();
    manifest.write(&out.with_extension("manifest.json"))?;
    println!(
        "consistency jaccard@{top} = {:.3} ({} vs {} rows) -> {}",
        report.jaccard,
        report.rows_small,
        report.rows_large,
        out.display()
    );
    Ok(())
}
