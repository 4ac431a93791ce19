//! Command-line front end used by the `da3d` binary.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 training diverged.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::data::{
    apply_meta, desk_task, load_csv, load_csv_unlabelled, preprocess, split_labels, synth_dataset,
    Dataset, DatasetMeta, PollutionSpec, Schema, SplitMode, SynthKind,
};
use crate::detector::score;
use crate::error::{Error, Result};
use crate::eval::{evaluate, roc_auc, run_experiment, write_report, EvalReport, ExperimentSummary};
use crate::generator::generate_anomalies;
use crate::matrix::Matrix;
use crate::rng::SeededRng;
use crate::trainer::{fit, TrainConfig, Variant};

const SYNTH_PREFIX: &str = "synth:";

#[derive(Debug, Parser)]
#[command(name = "da3d", version, about = "Unsupervised anomaly detection with generated anomalies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pretrain and train a model, write a checkpoint and a training log.
    Train(TrainArgs),
    /// Score samples with a trained checkpoint.
    Score(ScoreArgs),
    /// Evaluate a checkpoint, or train and evaluate fresh runs.
    Eval(EvalArgs),
    /// Run all three detector variants on the same data.
    Ablate(AblateArgs),
    /// Export generated anomalies from a trained checkpoint.
    Generate(GenerateArgs),
    /// Write a synthetic data set as CSV plus a matching schema.
    SynthData(SynthDataArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for data splitting, initialization and sampling [default: 42,
    /// or the config's seed]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training configuration (JSON, all fields required)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file, or `synth:blobs2d`, `synth:ring2d`, `synth:blobs10d`
    #[arg(long)]
    pub data: String,
    /// Column roles for CSV input
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Fraction of the training split replaced by anomalies
    #[arg(long, default_value_t = 0.0)]
    pub pollution: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "da3d")]
    pub mode: Variant,
    #[arg(long)]
    pub out_checkpoint: PathBuf,
    /// Training log CSV [default: <checkpoint>.log.csv]
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// CSV file (all rows are scored) or `synth:<kind>` (the test split)
    #[arg(long)]
    pub data: String,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Preprocessing metadata [default: <checkpoint>.meta.json]
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// Evaluate this checkpoint instead of training fresh runs
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub runs: usize,
    #[arg(long, default_value = "da3d")]
    pub mode: Variant,
    /// Report CSV; a JSON mirror is written next to it
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 7)]
    pub runs: usize,
    /// Directory for one report per variant
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthDataArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "blobs2d")]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 2200)]
    pub normal: usize,
    #[arg(long, default_value_t = 240)]
    pub anomalous: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Schema for the written file [default: <out>.schema.json]
    #[arg(long)]
    pub schema_out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Config(_) => 1,
        Error::NonFinite(_) => 3,
        _ => 2,
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Score(a) => cmd_score(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Generate(a) => cmd_generate(a),
        Command::SynthData(a) => cmd_synth_data(a),
    }
}

/// The effective configuration: the config file (or defaults) with the seed
/// overridden by `--seed` when given.
pub fn resolve_config(common: &Common) -> Result<TrainConfig> {
    let mut cfg = match &common.config {
        Some(p) => TrainConfig::from_json_file(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn synth_kind(data: &str) -> Option<Result<SynthKind>> {
    data.strip_prefix(SYNTH_PREFIX).map(str::parse)
}

/// Loads, splits, scales and optionally pollutes the data named by `--data`.
pub fn load_dataset(args: &DataArgs, seed: u64) -> Result<Dataset> {
    let ds = match synth_kind(&args.data) {
        Some(kind) => desk_task(kind?)?,
        None => {
            let schema_path = args.schema.as_ref().ok_or_else(|| {
                Error::Data(format!("--schema is required for CSV input `{}`", args.data))
            })?;
            let schema = Schema::from_json_file(schema_path)?;
            let raw = load_csv(Path::new(&args.data), &schema)?;
            if raw.dropped_rows > 0 {
                eprintln!("warning: dropped {} unparseable rows", raw.dropped_rows);
            }
            let split = split_labels(&raw.labels, seed, SplitMode::Clean)?;
            preprocess(&raw, &split)?
        }
    };
    for w in &ds.splits()?.warnings {
        eprintln!("warning: {w}");
    }
    if args.pollution > 0.0 {
        ds.pollute(&PollutionSpec {
            fraction: args.pollution,
            seed,
        })
    } else {
        Ok(ds)
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let cfg = resolve_config(&a.common)?;
    let ds = load_dataset(&a.data, cfg.seed)?;
    let train = ds.train_features()?;
    let split = ds.splits()?;
    let val = (!split.val.is_empty()).then(|| ds.val_features()).transpose()?;
    let (model, log) = fit(&train, val.as_ref(), &cfg, a.mode, &mut |_, _| {})?;
    save_checkpoint(&model, &a.out_checkpoint)?;
    ds.dataset_meta()
        .write(&with_suffix(&a.out_checkpoint, ".meta.json"))?;
    let log_path = a
        .log
        .unwrap_or_else(|| with_suffix(&a.out_checkpoint, ".log.csv"));
    log.write_csv(&log_path)?;
    let auc = evaluate(&model, &ds)?;
    println!(
        "trained {} on {} ({} samples), test AUC {auc:.4}",
        a.mode,
        ds.name,
        train.rows()
    );
    Ok(())
}

fn cmd_score(a: ScoreArgs) -> Result<()> {
    // scoring is deterministic; the config is only validated
    resolve_config(&a.common)?;
    let model = load_checkpoint(&a.checkpoint)?;
    let (x, labels): (Matrix, Option<Vec<u8>>) = match synth_kind(&a.data) {
        Some(kind) => {
            let ds = desk_task(kind?)?;
            (ds.test_features()?, Some(ds.test_labels()?))
        }
        None => {
            let schema_path = a.schema.as_ref().ok_or_else(|| {
                Error::Data(format!("--schema is required for CSV input `{}`", a.data))
            })?;
            let schema = Schema::from_json_file(schema_path)?;
            let meta_path = a
                .meta
                .clone()
                .unwrap_or_else(|| with_suffix(&a.checkpoint, ".meta.json"));
            let meta = DatasetMeta::read(&meta_path)?;
            let (raw, labelled) = load_csv_unlabelled(Path::new(&a.data), &schema)?;
            let x = apply_meta(&raw, &meta.columns)?;
            (x, labelled.then_some(raw.labels))
        }
    };
    let scores = score(&model, &x)?;
    write_scores(&a.out, &scores, labels.as_deref())?;
    match labels.as_deref().map(|l| roc_auc(&scores, l)) {
        Some(Ok(auc)) => println!("scored {} samples, AUC {auc:.4}", scores.len()),
        _ => println!("scored {} samples", scores.len()),
    }
    Ok(())
}

/// `index,score,label`, with label -1 when unknown.
pub fn write_scores(path: &Path, scores: &[f64], labels: Option<&[u8]>) -> Result<()> {
    let mut out = String::from("index,score,label\n");
    for (i, s) in scores.iter().enumerate() {
        let label = labels.map_or(-1, |l| i64::from(l[i]));
        out.push_str(&format!("{i},{s},{label}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn print_summary(s: &ExperimentSummary) {
    let first = &s.reports[0];
    println!(
        "{} on {} (pollution {}): AUC {:.4} ± {:.4} over {} runs",
        first.mode,
        first.dataset,
        first.pollution,
        s.mean,
        s.std,
        s.reports.len()
    );
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let cfg = resolve_config(&a.common)?;
    let ds = load_dataset(&a.data, cfg.seed)?;
    let summary = match &a.checkpoint {
        Some(path) => {
            let start = std::time::Instant::now();
            let model = load_checkpoint(path)?;
            let auc = evaluate(&model, &ds)?;
            let split = ds.splits()?;
            let report = EvalReport {
                experiment_id: format!("{}-checkpoint", ds.name),
                run: 0,
                mode: a.mode,
                dataset: ds.name.clone(),
                pollution: split.polluted.len() as f64 / split.train.len().max(1) as f64,
                seed: cfg.seed,
                auc,
                runtime_s: start.elapsed().as_secs_f64(),
                config_hash: cfg.hash(),
            };
            ExperimentSummary::from_reports(vec![report])
        }
        None => run_experiment(&ds, &cfg, a.mode, a.runs)?,
    };
    write_report(&summary.reports, &a.out)?;
    print_summary(&summary);
    Ok(())
}

fn cmd_ablate(a: AblateArgs) -> Result<()> {
    let cfg = resolve_config(&a.common)?;
    let ds = load_dataset(&a.data, cfg.seed)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    for mode in Variant::ALL {
        let summary = run_experiment(&ds, &cfg, mode, a.runs)?;
        write_report(&summary.reports, &a.out.join(format!("{}.csv", mode.name())))?;
        print_summary(&summary);
    }
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let cfg = resolve_config(&a.common)?;
    if a.count == 0 {
        return Err(Error::Config("--count must be at least 1".into()));
    }
    let model = load_checkpoint(&a.checkpoint)?;
    if !model.status.generator_trained {
        eprintln!("warning: the checkpoint's generator was never trained; samples are from its initial state");
    }
    let mut rng = SeededRng::new(cfg.seed);
    let x = generate_anomalies(&model, a.count, &mut rng)?;
    write_matrix_csv(&a.out, &x, None)
}

/// Header `x0..x{d-1}` plus an optional integer `label` column.
pub fn write_matrix_csv(path: &Path, x: &Matrix, labels: Option<&[u8]>) -> Result<()> {
    let mut header: Vec<String> = (0..x.cols()).map(|j| format!("x{j}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    let mut out = header.join(",");
    out.push('\n');
    for (i, row) in x.iter_rows().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(l) = labels {
            cells.push(l[i].to_string());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn cmd_synth_data(a: SynthDataArgs) -> Result<()> {
    let seed = a.common.seed.unwrap_or(TrainConfig::default().seed);
    if a.normal == 0 || a.anomalous == 0 {
        return Err(Error::Config("--normal and --anomalous must be at least 1".into()));
    }
    let ds = synth_dataset(a.kind, a.normal, a.anomalous, seed)?;
    write_matrix_csv(&a.out, &ds.features, Some(&ds.labels))?;
    let schema = Schema {
        label_column: "label".into(),
        normal_values: vec!["0".into()],
        categorical: vec![],
        ignore: vec![],
    };
    let schema_path = a
        .schema_out
        .unwrap_or_else(|| with_suffix(&a.out, ".schema.json"));
    let json = serde_json::to_string_pretty(&schema).expect("schema serialises");
    std::fs::write(&schema_path, json).map_err(|e| Error::io(&schema_path, e))?;
    println!(
        "wrote {} samples of {} to {}",
        ds.len(),
        a.kind,
        a.out.display()
    );
    Ok(())
}
