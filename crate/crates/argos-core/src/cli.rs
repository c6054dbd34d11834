//! Command-line front end. One binary, seven subcommands covering the
//! whole pipeline: stream generation, training, offline and live
//! detection, the node-side emulator, and evaluation.
//!
//! Exit codes: 0 success, 1 usage error, 2 bad input data, 3 runtime
//! failure.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::eval::experiment::{
    load_experiment, load_sweep, node_seconds, run_experiment, run_sweep, sweep_csv, sweep_table,
    SweepRow,
};
use crate::eval::{metrics_csv, AdversaryKind, EvalError};
use crate::models::{
    fit_threshold, load_model, save_model, train_model, ModelBundle, ModelError, ModelKind,
    TrainConfig,
};
use crate::sim::{ingest_csv_path, parse_scenario, save_csv};
use crate::types::{encode_second, registry_from_measurements, CellRegistry};
use crate::xapp::transport::{drive_reports, run_xapp, serve_stream, DEFAULT_MAX_ATTEMPTS};
use crate::xapp::{Engine, EngineConfig, XappError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Minimum telemetry volume `train` accepts; thresholds calibrated on
/// fewer seconds than this are statistically meaningless.
pub const MIN_TRAIN_SECONDS: usize = 100;

enum Failure {
    Data(String),
    Internal(String),
}

fn data<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

fn internal<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Internal(e.to_string())
}

fn from_model(e: ModelError) -> Failure {
    match e {
        // Bad training input is the caller's data; the rest is ours.
        ModelError::EmptyTrainingData
        | ModelError::RaggedTrainingData(..)
        | ModelError::UnknownKind(_) => data(e),
        _ => internal(e),
    }
}

fn from_xapp(e: XappError) -> Failure {
    match e {
        XappError::WidthMismatch { .. } | XappError::Type(_) | XappError::Node(_) => data(e),
        XappError::Model(m) => from_model(m),
        _ => internal(e),
    }
}

fn from_eval(e: EvalError) -> Failure {
    match e {
        EvalError::Model(m) => from_model(m),
        EvalError::Xapp(x) => from_xapp(x),
        EvalError::LengthMismatch { .. } => internal(e),
        _ => data(e),
    }
}

#[derive(Parser)]
#[command(
    name = "argos",
    version,
    about = "Rogue base station detection: simulate radio telemetry, train anomaly models, run the detection loop, evaluate."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a labeled telemetry stream from a scenario file
    Simulate(SimulateArgs),
    /// Train an anomaly model and threshold from telemetry CSV
    Train(TrainArgs),
    /// Replay telemetry CSV through the detection engine
    Detect(DetectArgs),
    /// Serve a telemetry CSV over TCP as the node-side endpoint
    E2node(E2nodeArgs),
    /// Connect to a node endpoint and run live detection
    Xapp(XappArgs),
    /// Run a single experiment from a spec file
    Evaluate(EvaluateArgs),
    /// Run a model x adversary x k grid from a sweep file
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file
    #[arg(long)]
    scenario: PathBuf,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario's seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Telemetry CSV (is_rogue column optional)
    #[arg(long)]
    input: PathBuf,
    /// Model kind: ae|dae|vae|iforest
    #[arg(long, default_value = "ae")]
    model: ModelKind,
    /// Output model file; the cell registry lands next to it
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    /// Registry text file (default: <out>.registry)
    #[arg(long)]
    registry_out: Option<PathBuf>,
}

#[derive(Args)]
struct EngineArgs {
    /// Model kind for bootstrap mode: ae|dae|vae|iforest
    #[arg(long, default_value = "ae")]
    model: ModelKind,
    /// Pretrained model file (bootstraps from scratch when absent)
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Registry file for --model-file (default: <model-file>.registry)
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    /// Drop flagged seconds from retraining unions
    #[arg(long)]
    exclude_flagged: bool,
    /// Retrain after this many fresh seconds; 0 disables retraining
    #[arg(long, default_value_t = crate::xapp::DEFAULT_RETRAIN_EVERY_S)]
    retrain_every: u64,
}

#[derive(Args)]
struct DetectArgs {
    /// Telemetry CSV to replay
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    /// Verdict file (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct E2nodeArgs {
    /// Address to listen on, e.g. 127.0.0.1:36421
    #[arg(long)]
    listen: String,
    /// Telemetry CSV to serve
    #[arg(long)]
    input: PathBuf,
    /// Give up after this many accepted connections
    #[arg(long, default_value_t = 16)]
    max_connections: u32,
}

#[derive(Args)]
struct XappArgs {
    /// Node endpoint address, e.g. 127.0.0.1:36421
    #[arg(long)]
    connect: String,
    #[command(flatten)]
    engine: EngineArgs,
    /// Verdict file (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    node_id: u32,
    /// Consecutive connection failures tolerated before giving up
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    max_attempts: u32,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Experiment spec file
    #[arg(long)]
    spec: PathBuf,
    /// Metric CSV path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the spec's model kind
    #[arg(long)]
    model: Option<ModelKind>,
    /// Override the spec's labeling threshold (2..=4)
    #[arg(long)]
    k: Option<u32>,
    /// Override the spec's adversary: a1|a2|holdout
    #[arg(long)]
    adversary: Option<AdversaryKind>,
    /// Override the spec's train fraction (0, 1)
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep grid file
    #[arg(long)]
    grid: PathBuf,
    /// Sweep CSV path (table always goes to stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.cmd {
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Detect(a) => cmd_detect(a),
        Cmd::E2node(a) => cmd_e2node(a),
        Cmd::Xapp(a) => cmd_xapp(a),
        Cmd::Evaluate(a) => cmd_evaluate(a),
        Cmd::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            EXIT_DATA
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INTERNAL
        }
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&a.scenario)
        .map_err(|e| Failure::Data(format!("reading {}: {e}", a.scenario.display())))?;
    let mut scenario = parse_scenario(&text).map_err(data)?;
    if let Some(seed) = a.seed {
        scenario.config.seed = seed;
    }
    let stream = scenario.generate().map_err(data)?;
    save_csv(&a.out, &stream).map_err(internal)?;
    eprintln!(
        "wrote {} reports covering {} s to {}",
        stream.len(),
        scenario.config.duration_s,
        a.out.display()
    );
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".registry");
    PathBuf::from(s)
}

fn load_reports(path: &Path) -> Result<Vec<crate::types::MeasurementReport>, Failure> {
    let (reports, clamped) = ingest_csv_path(path)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    if clamped > 0 {
        eprintln!("warning: {clamped} out-of-range values clamped");
    }
    Ok(reports)
}

fn cmd_train(a: TrainArgs) -> Result<(), Failure> {
    let reports = load_reports(&a.input)?;
    let seconds = node_seconds(reports.iter()).map_err(from_eval)?;
    if seconds.len() < MIN_TRAIN_SECONDS {
        return Err(Failure::Data(format!(
            "training needs at least {MIN_TRAIN_SECONDS} seconds of telemetry, got {}",
            seconds.len()
        )));
    }
    let registry = registry_from_measurements(seconds.iter().flat_map(|(_, _, b)| b.iter()))
        .map_err(data)?;
    let mut vectors = Vec::with_capacity(seconds.len());
    for (ue, second, batch) in &seconds {
        vectors.push(encode_second(ue, *second, batch, &registry).map_err(data)?.features);
    }
    let cfg = TrainConfig { seed: a.seed, epochs: a.epochs, ..TrainConfig::default() };
    let t0 = Instant::now();
    let (model, stats) = train_model(a.model, &vectors, &cfg).map_err(from_model)?;
    let threshold = fit_threshold(&model, &vectors).map_err(from_model)?;
    let elapsed = t0.elapsed().as_secs_f64();
    let bundle = ModelBundle { model, threshold };
    save_model(&a.out, &bundle).map_err(internal)?;
    let registry_path = a.registry_out.unwrap_or_else(|| sidecar(&a.out));
    fs::write(&registry_path, registry.to_text()).map_err(internal)?;
    eprintln!(
        "trained {} on {} seconds (width {}): loss {:.6} -> {:.6}, tau {:.6e}, {:.2} s",
        a.model,
        vectors.len(),
        registry.feature_width(),
        stats.initial_loss,
        stats.final_loss,
        bundle.threshold.tau,
        elapsed
    );
    eprintln!("model: {}", a.out.display());
    eprintln!("registry: {}", registry_path.display());
    Ok(())
}

fn build_engine(a: &EngineArgs) -> Result<Engine, Failure> {
    let train = TrainConfig { seed: a.seed, epochs: a.epochs, ..TrainConfig::default() };
    let cfg = EngineConfig {
        kind: a.model,
        train,
        retrain_every_s: match a.retrain_every {
            0 => None,
            s => Some(s),
        },
        exclude_flagged: a.exclude_flagged,
        ..EngineConfig::default()
    };
    match &a.model_file {
        None => {
            if a.registry.is_some() {
                return Err(Failure::Data("--registry only makes sense with --model-file".into()));
            }
            Ok(Engine::bootstrap(cfg))
        }
        Some(model_path) => {
            let bundle = load_model(model_path)
                .map_err(|e| Failure::Data(format!("{}: {e}", model_path.display())))?;
            let registry_path =
                a.registry.clone().unwrap_or_else(|| sidecar(model_path));
            let text = fs::read_to_string(&registry_path)
                .map_err(|e| Failure::Data(format!("{}: {e}", registry_path.display())))?;
            let registry = CellRegistry::from_text(&text).map_err(data)?;
            Engine::pretrained(cfg, bundle, registry).map_err(from_xapp)
        }
    }
}

/// Runs `body` with a line sink on `out` (file) or stdout, propagating
/// the first write error.
fn with_sink<T>(
    out: Option<&Path>,
    body: impl FnOnce(&mut dyn Write) -> Result<T, Failure>,
) -> Result<T, Failure> {
    match out {
        Some(path) => {
            let file = fs::File::create(path)
                .map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            let value = body(&mut w)?;
            w.flush().map_err(internal)?;
            Ok(value)
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            let value = body(&mut w)?;
            w.flush().map_err(internal)?;
            Ok(value)
        }
    }
}

fn cmd_detect(a: DetectArgs) -> Result<(), Failure> {
    let reports = load_reports(&a.input)?;
    let mut engine = build_engine(&a.engine)?;
    let stats = with_sink(a.out.as_deref(), |sink| {
        let mut write_err: Option<io::Error> = None;
        let stats = drive_reports(reports.iter(), &mut engine, |v| {
            if let Err(e) = writeln!(sink, "{}", v.to_line()) {
                write_err.get_or_insert(e);
            }
        })
        .map_err(from_xapp)?;
        match write_err {
            Some(e) => Err(internal(e)),
            None => Ok(stats),
        }
    })?;
    eprintln!(
        "{} verdicts, {} anomalies, generation {}, {} retrain failures",
        stats.verdicts,
        stats.anomalies,
        engine.generation(),
        stats.retrain_failures
    );
    Ok(())
}

fn cmd_e2node(a: E2nodeArgs) -> Result<(), Failure> {
    let reports = load_reports(&a.input)?;
    let listener = TcpListener::bind(&a.listen)
        .map_err(|e| Failure::Internal(format!("bind {}: {e}", a.listen)))?;
    eprintln!("serving {} reports on {}", reports.len(), a.listen);
    let stats = serve_stream(&listener, &reports, a.max_connections).map_err(from_xapp)?;
    eprintln!(
        "done: {} connections, {} indications, {} late measurements dropped",
        stats.connections, stats.indications, stats.late_arrivals
    );
    Ok(())
}

fn cmd_xapp(a: XappArgs) -> Result<(), Failure> {
    let mut engine = build_engine(&a.engine)?;
    let stats = with_sink(a.out.as_deref(), |sink| {
        let mut sink = sink;
        run_xapp(&a.connect, &mut engine, &mut sink, a.node_id, a.max_attempts).map_err(from_xapp)
    })?;
    eprintln!(
        "{} verdicts ({} anomalies), {} reconnects, {} retrain failures",
        stats.verdicts, stats.anomalies, stats.reconnects, stats.retrain_failures
    );
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), Failure> {
    let (mut spec, scenario) = load_experiment(&a.spec).map_err(from_eval)?;
    if let Some(v) = a.model {
        spec.model = v;
    }
    if let Some(v) = a.k {
        spec.k = v;
    }
    if let Some(v) = a.adversary {
        spec.adversary = v;
    }
    if let Some(v) = a.split {
        spec.split = v;
    }
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    if let Some(v) = a.epochs {
        spec.epochs = v;
    }
    let report = run_experiment(&spec, &scenario).map_err(from_eval)?;
    let fmt_rate = |v: Option<f64>| match v {
        Some(x) => format!("{x:.4}"),
        None => "NA".into(),
    };
    eprintln!(
        "{} vs {} at k={}: accuracy {:.4}, precision {}, recall {}, f1 {}, fpr {}",
        report.model,
        report.adversary,
        report.k,
        report.metrics.accuracy,
        fmt_rate(report.metrics.precision),
        fmt_rate(report.metrics.recall),
        fmt_rate(report.metrics.f1),
        fmt_rate(report.metrics.fpr),
    );
    eprintln!(
        "train {:.2} s, inference {:.3} s, peak memory {:.1} MB",
        report.train_time_s, report.infer_time_s, report.peak_memory_mb
    );
    let csv = metrics_csv(&[report]);
    match &a.out {
        Some(path) => fs::write(path, csv)
            .map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let (mut spec, scenarios) = load_sweep(&a.grid).map_err(from_eval)?;
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    if let Some(v) = a.split {
        spec.split = v;
    }
    if let Some(v) = a.epochs {
        spec.epochs = v;
    }
    let rows = run_sweep(&spec, &scenarios, |row| match row {
        SweepRow::Done(r) => eprintln!(
            "done  {} {} k={}  acc {:.4}",
            r.model, r.adversary, r.k, r.metrics.accuracy
        ),
        SweepRow::Failed { model, adversary, k, error } => {
            eprintln!("fail  {model} {adversary} k={k}  {error}")
        }
    });
    print!("{}", sweep_table(&rows));
    if let Some(path) = &a.out {
        fs::write(path, sweep_csv(&rows))
            .map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))?;
        eprintln!("csv: {}", path.display());
    }
    if rows.iter().all(|r| matches!(r, SweepRow::Failed { .. })) {
        return Err(Failure::Data("every sweep row failed".into()));
    }
    Ok(())
}
