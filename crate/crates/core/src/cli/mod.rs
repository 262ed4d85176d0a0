//! The `ict` command line.
//!
//! Exit codes: 0 on success, 2 for usage, configuration, data or I/O
//! errors, 3 when training hits a non-finite value.

mod config;
mod run;

pub use config::{read_config_file, read_manifest_config, resolve, Resolved, RunOptions, Source};
pub use run::{prepare_data, run_training, PreparedData, RunResult};

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::data::{gaussian_clusters, ingest_csv, two_moons, write_csv, CsvSchema, Dataset};
use crate::error::{Error, Result};
use crate::eval::{error_rate, export_boundary, GridSpec, TrialRecord, TrialReport};
use crate::hash;
use crate::ict::Method;
use crate::nn::{load_checkpoint, save_checkpoint};

/// Default parent directory for outputs when `--out` is not given.
pub const OUT_DIR_ENV: &str = "ICT_OUT_DIR";

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ict",
    version,
    about = "Interpolation consistency training experiments",
    args_override_self = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV plus a provenance sidecar.
    Generate(GenerateArgs),
    /// Train one model and write checkpoints, manifest and loss trace.
    Train(TrainArgs),
    /// Print the error rate of a checkpoint on a labeled CSV.
    Eval(EvalArgs),
    /// Run several seeds of the same configuration and aggregate.
    Experiment(ExperimentArgs),
    /// Evaluate a 2-D model on a lattice and write the probabilities.
    ExportBoundary(BoundaryArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Generator {
    TwoMoons,
    GaussianClusters,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    generator: Generator,
    /// Number of rows.
    #[arg(long)]
    n: usize,
    /// Noise standard deviation (cluster spread for gaussian_clusters).
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cluster centers as `x,y;x,y;...` (gaussian_clusters only).
    #[arg(long)]
    centers: Option<String>,
    /// Class of each cluster as `0,1,...`; defaults to one class per cluster.
    #[arg(long)]
    classes: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_serde<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(Value::String(s.to_owned())).map_err(|e| e.to_string())
}

/// Comma-separated hidden layer widths.
#[derive(Debug, Clone, Serialize)]
#[serde(transparent)]
struct Widths(Vec<usize>);

impl FromStr for Widths {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.trim().is_empty() {
            return Ok(Widths(Vec::new()));
        }
        s.split(',')
            .map(|w| w.trim().parse::<usize>().map_err(|e| format!("`{w}`: {e}")))
            .collect::<std::result::Result<_, _>>()
            .map(Widths)
    }
}

/// Overrides; every `Some` field becomes a command-line layer of the config.
#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    /// TOML file with a `[train]` section of config keys.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Re-run the resolved config stored in a run manifest.
    #[arg(long)]
    #[serde(skip)]
    replay: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<Method>,
    /// Labeled CSV to split instead of generated two moons.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    data_seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    labels_per_class: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    unlabeled_count: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    validation_count: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    test_count: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    include_labeled_in_unlabeled: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    standardize: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint_every: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    log_every: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    beta_alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    w_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ramp_fraction: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ema_decay: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ema_warmup: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ema_after_step: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    labeled_batch: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    unlabeled_batch: Option<usize>,
    #[arg(long = "epochs")]
    #[serde(rename = "total_epochs", skip_serializing_if = "Option::is_none")]
    total_epochs: Option<usize>,
    /// vanilla | mixup
    #[arg(long, value_parser = parse_serde::<crate::ict::SupervisedMode>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    supervised_mode: Option<crate::ict::SupervisedMode>,
    /// mean_teacher | student
    #[arg(long, value_parser = parse_serde::<crate::ict::TeacherMode>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    teacher_mode: Option<crate::ict::TeacherMode>,
    /// independent | shuffled_self
    #[arg(long, value_parser = parse_serde::<crate::ict::UnlabeledPairing>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pairing: Option<crate::ict::UnlabeledPairing>,
    /// teacher | student
    #[arg(long, value_parser = parse_serde::<crate::ict::EvalNetwork>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eval_network: Option<crate::ict::EvalNetwork>,
    #[arg(long = "lr")]
    #[serde(rename = "base_lr", skip_serializing_if = "Option::is_none")]
    base_lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    momentum: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    l2: Option<f64>,
    /// Hidden widths, e.g. `20,20,20`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    hidden: Option<Widths>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Labeled CSV.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 3)]
    trials: usize,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Debug, Args)]
struct BoundaryArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = -1.5, allow_hyphen_values = true)]
    x_min: f64,
    #[arg(long, default_value_t = 2.5, allow_hyphen_values = true)]
    x_max: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    y_min: f64,
    #[arg(long, default_value_t = 1.5, allow_hyphen_values = true)]
    y_max: f64,
    #[arg(long, default_value_t = 100)]
    nx: usize,
    #[arg(long, default_value_t = 100)]
    ny: usize,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Experiment(a) => cmd_experiment(&a),
        Command::ExportBoundary(a) => cmd_export_boundary(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_USAGE
    }
}

fn default_out(name: &str) -> PathBuf {
    let base = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
    base.join(name)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("{what}: cannot parse `{v}`")))
        })
        .collect()
}

fn cmd_generate(a: &GenerateArgs) -> Result<i32> {
    let ds = match a.generator {
        Generator::TwoMoons => two_moons(a.n, a.noise, a.seed)?,
        Generator::GaussianClusters => {
            let spec = a.centers.as_deref().ok_or_else(|| {
                Error::InvalidArgument(
                    "missing required parameter --centers for gaussian_clusters".into(),
                )
            })?;
            let centers: Vec<Vec<f64>> = spec
                .split(';')
                .map(|c| parse_list(c, "--centers"))
                .collect::<Result<_>>()?;
            let classes: Vec<usize> = match &a.classes {
                Some(c) => parse_list(c, "--classes")?,
                None => (0..centers.len()).collect(),
            };
            if !a.n.is_multiple_of(centers.len()) {
                return Err(Error::InvalidArgument(format!(
                    "--n {} is not a multiple of the {} clusters",
                    a.n,
                    centers.len()
                )));
            }
            gaussian_clusters(&centers, a.n / centers.len(), a.noise, &classes, a.seed)?
        }
    };
    let name = match a.generator {
        Generator::TwoMoons => "two_moons",
        Generator::GaussianClusters => "gaussian_clusters",
    };
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| default_out(&format!("{name}-seed{}.csv", a.seed)));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_csv(&ds, &out)?;
    let sidecar = PathBuf::from(format!("{}.provenance.json", out.display()));
    let meta = json!({
        "generator": name,
        "provenance": ds.provenance(),
        "rows": ds.len(),
        "dim": ds.dim(),
        "class_count": ds.class_count(),
        "fingerprint": ds.fingerprint_hex(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_text(&sidecar, &pretty(&meta))?;
    println!("wrote {} rows to {}", ds.len(), out.display());
    Ok(0)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn resolve_train(a: &TrainArgs, sections: &[&str]) -> Result<Resolved> {
    let mut layers = Vec::new();
    if let Some(path) = &a.config {
        layers.push((Source::File, read_config_file(path, sections)?));
    }
    if let Some(path) = &a.replay {
        layers.push((Source::Manifest, read_manifest_config(path)?));
    }
    let cli = match serde_json::to_value(a).expect("args serialize") {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    layers.push((Source::Cli, cli));
    resolve(&layers)
}

fn dataset_entry(ds: &Dataset, file: Option<&str>) -> Value {
    json!({
        "rows": ds.len(),
        "dim": ds.dim(),
        "fingerprint": ds.fingerprint_hex(),
        "provenance": ds.provenance(),
        "file": file,
    })
}

fn cmd_train(a: &TrainArgs) -> Result<i32> {
    let resolved = resolve_train(a, &["train"])?;
    let cfg = &resolved.ict;
    let opts = &resolved.options;
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| default_out(&format!("{}-seed{}", opts.method, cfg.seed)));
    create_dir(&out)?;

    let data = prepare_data(opts, cfg.seed)?;
    let s = &data.splits;
    let mut files = Map::new();
    let mut datasets = Map::new();
    datasets.insert("source".into(), dataset_entry(&data.source, None));
    for (name, ds) in [
        ("labeled", Some(&s.labeled)),
        ("unlabeled", Some(&s.unlabeled)),
        ("validation", s.validation.as_ref()),
        ("test", s.test.as_ref()),
    ] {
        if let Some(ds) = ds {
            let file = format!("{name}.csv");
            write_csv(ds, out.join(&file))?;
            datasets.insert(name.into(), dataset_entry(ds, Some(&file)));
        }
    }

    let every = opts.checkpoint_every;
    let snap_dir = out.join("checkpoints");
    if every > 0 {
        create_dir(&snap_dir)?;
    }
    let result = run_training(cfg, &data, |state, model| {
        if every > 0 && state.step % every == 0 {
            save_checkpoint(
                &model.student,
                snap_dir.join(format!("step-{:06}-student.ckpt", state.step)),
            )?;
            save_checkpoint(
                model.teacher.network(),
                snap_dir.join(format!("step-{:06}-teacher.ckpt", state.step)),
            )?;
        }
        Ok(())
    })?;
    let outcome = &result.outcome;

    save_checkpoint(&outcome.student, out.join("student.ckpt"))?;
    save_checkpoint(&outcome.teacher, out.join("teacher.ckpt"))?;
    files.insert("student".into(), json!("student.ckpt"));
    files.insert("teacher".into(), json!("teacher.ckpt"));
    let final_file = match cfg.eval_network {
        crate::ict::EvalNetwork::Teacher => "teacher.ckpt",
        crate::ict::EvalNetwork::Student => "student.ckpt",
    };
    files.insert("final".into(), json!(final_file));
    if let Some(best) = &outcome.best {
        save_checkpoint(&best.network, out.join("best.ckpt"))?;
        files.insert("best".into(), json!("best.ckpt"));
    }

    let mut trace = String::new();
    let last = outcome.state.loss_trace.len();
    for (i, r) in outcome.state.loss_trace.iter().enumerate() {
        if r.step % opts.log_every == 0 || r.val_error.is_some() || i + 1 == last {
            trace.push_str(&serde_json::to_string(r).expect("trace serializes"));
            trace.push('\n');
        }
    }
    write_text(&out.join("trace.jsonl"), &trace)?;
    files.insert("trace".into(), json!("trace.jsonl"));

    let manifest = json!({
        "command": "train",
        "version": env!("CARGO_PKG_VERSION"),
        "config": resolved.flat(),
        "sources": resolved.sources,
        "config_fingerprint": hash::hex(cfg.fingerprint()),
        "datasets": datasets,
        "outputs": files,
        "results": {
            "steps": outcome.state.step,
            "steps_per_epoch": outcome.steps_per_epoch,
            "epochs": outcome.state.epoch,
            "eval_network": cfg.eval_network,
            "final_test_error_percent": result.final_test_error,
            "selected_test_error_percent": result.selected_test_error,
            "best_epoch": outcome.best.as_ref().map(|b| b.epoch),
            "best_val_error_percent": outcome.best.as_ref().map(|b| b.val_error),
            "student_param_hash": hash::hex(outcome.student.param_hash()),
            "teacher_param_hash": hash::hex(outcome.teacher.param_hash()),
        },
    });
    write_text(&out.join("manifest.json"), &pretty(&manifest))?;

    println!("run directory: {}", out.display());
    println!("steps: {}", outcome.state.step);
    if let Some(e) = result.final_test_error {
        println!("test_error_percent={e:.2}");
    }
    Ok(0)
}

fn cmd_eval(a: &EvalArgs) -> Result<i32> {
    let net = load_checkpoint(&a.checkpoint)?;
    let ds = ingest_csv(&a.data, &CsvSchema::labeled(net.num_classes()))?;
    if ds.dim() != net.input_dim() {
        return Err(Error::Dimension(format!(
            "checkpoint expects {} features, {} has {}",
            net.input_dim(),
            a.data.display(),
            ds.dim()
        )));
    }
    let err = error_rate(&net, &ds)?;
    println!("error: {err:.2}% on {} rows", ds.len());
    println!("test_error_percent={err:.2}");
    Ok(0)
}

#[derive(Debug, Serialize)]
struct ExperimentReport {
    method: Method,
    /// Trial errors are measured on the best-validation network.
    selection: &'static str,
    #[serde(flatten)]
    report: TrialReport,
    config: Map<String, Value>,
    version: &'static str,
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<i32> {
    if a.trials == 0 {
        return Err(Error::InvalidArgument("--trials must be >= 1".into()));
    }
    let resolved = resolve_train(&a.train, &["train", "experiment"])?;
    let base = resolved.ict.seed;
    let out = a.train.out.clone().unwrap_or_else(|| {
        default_out(&format!(
            "experiment-{}-seed{base}",
            resolved.options.method
        ))
    });
    create_dir(&out)?;

    let mut trials = Vec::with_capacity(a.trials);
    let mut worst = 0;
    for i in 0..a.trials as u64 {
        let seed = base + i;
        let mut cfg = resolved.ict.clone();
        cfg.seed = seed;
        let outcome = prepare_data(&resolved.options, seed)
            .and_then(|d| run_training(&cfg, &d, |_, _| Ok(())));
        let record = match outcome {
            Ok(r) => match r.selected_test_error {
                Some(e) => TrialRecord {
                    seed,
                    test_error_percent: Some(e),
                    failure: None,
                },
                None => {
                    worst = worst.max(EXIT_USAGE);
                    TrialRecord {
                        seed,
                        test_error_percent: None,
                        failure: Some("no test split (test_count = 0)".into()),
                    }
                }
            },
            Err(e) => {
                worst = worst.max(exit_code(&e));
                TrialRecord {
                    seed,
                    test_error_percent: None,
                    failure: Some(e.to_string()),
                }
            }
        };
        match (&record.test_error_percent, &record.failure) {
            (Some(e), _) => println!("trial seed={seed}: test_error_percent={e:.2}"),
            (_, Some(f)) => eprintln!("trial seed={seed} failed: {f}"),
            _ => {}
        }
        trials.push(record);
    }
    let report = ExperimentReport {
        method: resolved.options.method,
        selection: "best_validation",
        report: TrialReport::new(trials, hash::hex(resolved.ict.fingerprint())),
        config: resolved.flat(),
        version: env!("CARGO_PKG_VERSION"),
    };
    let path = out.join("report.json");
    write_text(
        &path,
        &pretty(&serde_json::to_value(&report).expect("report serializes")),
    )?;
    if let (Some(m), Some(sd)) = (report.report.mean, report.report.sd) {
        println!("mean_test_error_percent={m:.2} sd={sd:.2}");
    }
    println!("report: {}", path.display());
    Ok(worst)
}

fn cmd_export_boundary(a: &BoundaryArgs) -> Result<i32> {
    let net = load_checkpoint(&a.checkpoint)?;
    let spec = GridSpec {
        x_min: a.x_min,
        x_max: a.x_max,
        y_min: a.y_min,
        y_max: a.y_max,
        nx: a.nx,
        ny: a.ny,
    };
    let grid = export_boundary(&net, &spec)?;
    let out = a.out.clone().unwrap_or_else(|| default_out("boundary.csv"));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    grid.save_csv(&out)?;
    println!("wrote {} cells to {}", grid.cell_count(), out.display());
    Ok(0)
}
