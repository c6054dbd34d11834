//! End-to-end experiment runner: generate a labeled stream, split it
//! into train/inference portions, push both through the node emulator
//! so quantization matches the wire path, train a model and threshold
//! on the clean portion, replay the inference portion through a frozen
//! detection engine, and score the verdicts against ground truth.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::e2node::E2Node;
use crate::models::{fit_threshold, train_model, ModelBundle, ModelKind, TrainConfig};
use crate::sim::{holdout_split, parse_scenario, AdversaryMode, LabeledReport, Scenario};
use crate::types::{
    encode_second, registry_from_measurements, CellIdentity, CellMeasurement, Rat,
};
use crate::xapp::transport::drive_reports;
use crate::xapp::{Decision, Engine, EngineConfig, Verdict};
use crate::codec::WireMessage;

use super::{compute_metrics, AdversaryKind, EvalError, MetricReport, Metrics};

pub const MEMORY_SAMPLE_INTERVAL: Duration = Duration::from_millis(100);

/// One experiment: which scenario, which model, which rogue
/// presentation, and the labeling threshold `k` (rogue appearances per
/// second needed to call the second anomalous).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario_path: PathBuf,
    pub model: ModelKind,
    pub adversary: AdversaryKind,
    pub k: u32,
    pub split: f64,
    pub seed: u64,
    pub epochs: usize,
    /// Cell withheld from training, required iff `adversary` is `Holdout`.
    pub holdout_cell: Option<CellIdentity>,
}

impl ExperimentSpec {
    pub fn validate(&self, scenario: &Scenario) -> Result<(), EvalError> {
        let fail = |msg: String| Err(EvalError::ScenarioMismatch(msg));
        if !(self.split > 0.0 && self.split < 1.0) {
            return fail(format!("split {} outside (0, 1)", self.split));
        }
        if !(2..=4).contains(&self.k) {
            return fail(format!("k {} outside 2..=4", self.k));
        }
        if self.epochs == 0 {
            return fail("epochs must be positive".into());
        }
        match self.adversary {
            AdversaryKind::A1 | AdversaryKind::A2 => {
                let want = if self.adversary == AdversaryKind::A1 {
                    AdversaryMode::A1
                } else {
                    AdversaryMode::A2
                };
                match &scenario.adversary {
                    None => fail(format!("adversary {} needs a scenario with a rogue transmitter", self.adversary)),
                    Some(a) if a.mode != want => fail(format!(
                        "experiment wants {} but the scenario configures the other mode",
                        self.adversary
                    )),
                    Some(_) if self.holdout_cell.is_some() => {
                        fail("holdout_cell is only valid with adversary = holdout".into())
                    }
                    Some(_) => Ok(()),
                }
            }
            AdversaryKind::Holdout => {
                if scenario.adversary.is_some() {
                    return fail("holdout evaluation needs a benign scenario".into());
                }
                match self.holdout_cell {
                    None => fail("holdout evaluation needs holdout_cell".into()),
                    Some(cell) => {
                        if scenario.config.cells.iter().any(|c| c.cell == cell) {
                            Ok(())
                        } else {
                            fail(format!(
                                "holdout cell {}:{}:{} not present in the scenario",
                                cell.rat, cell.arfcn, cell.pci
                            ))
                        }
                    }
                }
            }
        }
    }
}

fn read_vm_hwm_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmHWM:") {
            return rest.trim().trim_end_matches("kB").trim().parse().ok();
        }
    }
    None
}

/// Samples the process memory high-water mark every 100 ms on a helper
/// thread; `finish` takes one last sample and reports megabytes.
pub struct MemorySampler {
    stop: Arc<AtomicBool>,
    peak_kb: Arc<AtomicU64>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl MemorySampler {
    pub fn start() -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let peak_kb = Arc::new(AtomicU64::new(read_vm_hwm_kb().unwrap_or(0)));
        let handle = {
            let stop = Arc::clone(&stop);
            let peak_kb = Arc::clone(&peak_kb);
            std::thread::spawn(move || {
                while !stop.load(Ordering::Relaxed) {
                    if let Some(kb) = read_vm_hwm_kb() {
                        peak_kb.fetch_max(kb, Ordering::Relaxed);
                    }
                    std::thread::sleep(MEMORY_SAMPLE_INTERVAL);
                }
            })
        };
        Self { stop, peak_kb, handle: Some(handle) }
    }

    pub fn finish(mut self) -> f64 {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(kb) = read_vm_hwm_kb() {
            self.peak_kb.fetch_max(kb, Ordering::Relaxed);
        }
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
        self.peak_kb.load(Ordering::Relaxed) as f64 / 1024.0
    }
}

/// Seconds strictly before the boundary train; the rest is replayed.
pub fn split_boundary(duration_s: u64, split: f64) -> u64 {
    (duration_s as f64 * split).floor() as u64
}

fn split_stream(
    stream: &[LabeledReport],
    boundary_s: u64,
) -> (Vec<LabeledReport>, Vec<LabeledReport>) {
    let mut train = Vec::new();
    let mut infer = Vec::new();
    for lr in stream {
        if lr.report.first_timestamp_ms() / 1000 < boundary_s {
            train.push(lr.clone());
        } else {
            infer.push(lr.clone());
        }
    }
    (train, infer)
}

/// Replays reports through a node emulator and collects the emitted
/// per-second measurement batches, so training sees exactly the
/// quantized values the detection engine will.
pub fn node_seconds<'a>(
    reports: impl IntoIterator<Item = &'a crate::types::MeasurementReport>,
) -> Result<Vec<(String, u64, Vec<CellMeasurement>)>, EvalError> {
    let mut node = E2Node::new();
    node.handle_setup(1);
    node.handle_subscription(1, 1000);
    let mut out = Vec::new();
    let collect = |msgs: Vec<WireMessage>, out: &mut Vec<_>| -> Result<(), EvalError> {
        for msg in msgs {
            if let WireMessage::RicIndication { ue_id, second_index, measurements, .. } = msg {
                let mut batch = Vec::with_capacity(measurements.len());
                for wm in &measurements {
                    batch.push(wm.to_measurement()?);
                }
                out.push((ue_id, second_index, batch));
            }
        }
        Ok(())
    };
    for r in reports {
        let msgs = node.on_report(r)?;
        collect(msgs, &mut out)?;
    }
    collect(node.flush_all(), &mut out)?;
    Ok(out)
}

struct PipelineRun {
    verdicts: Vec<Verdict>,
    /// Ground-truth rogue appearances per (ue, second) on the replayed portion.
    rogue_counts: BTreeMap<(String, u64), u32>,
    train_time_s: f64,
    infer_time_s: f64,
    peak_memory_mb: f64,
}

fn run_pipeline(spec: &ExperimentSpec, scenario: &Scenario) -> Result<PipelineRun, EvalError> {
    spec.validate(scenario)?;
    let stream = scenario.generate()?;
    let (train, infer) = match spec.adversary {
        AdversaryKind::Holdout => {
            holdout_split(&stream, spec.holdout_cell.unwrap(), spec.split)?
        }
        _ => split_stream(&stream, split_boundary(scenario.config.duration_s, spec.split)),
    };

    let mut rogue_counts: BTreeMap<(String, u64), u32> = BTreeMap::new();
    for lr in &infer {
        for (m, &from_rogue) in lr.report.neighbors.iter().zip(&lr.rogue_mask) {
            let hit = match spec.adversary {
                AdversaryKind::Holdout => Some(m.cell) == spec.holdout_cell,
                _ => from_rogue,
            };
            if hit {
                let key = (lr.report.ue_id.clone(), m.timestamp_ms / 1000);
                *rogue_counts.entry(key).or_insert(0) += 1;
            }
        }
    }

    let sampler = MemorySampler::start();

    let seconds = node_seconds(train.iter().map(|lr| &lr.report))?;
    let registry =
        registry_from_measurements(seconds.iter().flat_map(|(_, _, batch)| batch.iter()))?;
    let mut vectors = Vec::with_capacity(seconds.len());
    for (ue, second, batch) in &seconds {
        vectors.push(encode_second(ue, *second, batch, &registry)?.features);
    }

    let train_cfg = TrainConfig { seed: spec.seed, epochs: spec.epochs, ..TrainConfig::default() };
    let t0 = Instant::now();
    let (model, _stats) = train_model(spec.model, &vectors, &train_cfg)?;
    let threshold = fit_threshold(&model, &vectors)?;
    let train_time_s = t0.elapsed().as_secs_f64();

    // Inference cost is the model scoring the evaluation window, timed
    // over the same per-second vectors the engine will see. The verdict
    // replay below re-scores through the engine, untimed, so pipeline
    // bookkeeping (buffers, registries, formatting) never pollutes the
    // reported inference time.
    let infer_seconds = node_seconds(infer.iter().map(|lr| &lr.report))?;
    let mut infer_vectors = Vec::with_capacity(infer_seconds.len());
    for (ue, second, batch) in &infer_seconds {
        infer_vectors.push(encode_second(ue, *second, batch, &registry)?.features);
    }
    let t1 = Instant::now();
    let mut score_sum = 0.0;
    for v in &infer_vectors {
        score_sum += model.score(v)?;
    }
    std::hint::black_box(score_sum);
    let infer_time_s = t1.elapsed().as_secs_f64();

    let cfg = EngineConfig {
        kind: spec.model,
        train: train_cfg,
        retrain_every_s: None,
        ..EngineConfig::default()
    };
    let mut engine = Engine::pretrained(cfg, ModelBundle { model, threshold }, registry)?;
    let mut verdicts = Vec::new();
    drive_reports(infer.iter().map(|lr| &lr.report), &mut engine, |v| {
        verdicts.push(v.clone());
    })?;
    let peak_memory_mb = sampler.finish();

    Ok(PipelineRun { verdicts, rogue_counts, train_time_s, infer_time_s, peak_memory_mb })
}

fn metrics_for_k(run: &PipelineRun, k: u32) -> Result<Metrics, EvalError> {
    let predictions: Vec<bool> =
        run.verdicts.iter().map(|v| v.decision == Decision::Anomaly).collect();
    let labels: Vec<bool> = run
        .verdicts
        .iter()
        .map(|v| {
            run.rogue_counts
                .get(&(v.ue_id.clone(), v.second_index))
                .copied()
                .unwrap_or(0)
                >= k
        })
        .collect();
    compute_metrics(&predictions, &labels)
}

pub fn run_experiment(
    spec: &ExperimentSpec,
    scenario: &Scenario,
) -> Result<MetricReport, EvalError> {
    let run = run_pipeline(spec, scenario)?;
    Ok(MetricReport {
        model: spec.model,
        adversary: spec.adversary,
        k: spec.k,
        split: spec.split,
        seed: spec.seed,
        metrics: metrics_for_k(&run, spec.k)?,
        train_time_s: run.train_time_s,
        infer_time_s: run.infer_time_s,
        peak_memory_mb: run.peak_memory_mb,
    })
}

/// Like `run_experiment` for several `k` values at once: the stream,
/// training, and replay happen a single time (none of them depend on
/// `k`), and only the labeling is redone per value.
pub fn run_experiment_over_ks(
    spec: &ExperimentSpec,
    scenario: &Scenario,
    ks: &[u32],
) -> Result<Vec<MetricReport>, EvalError> {
    let mut probe = spec.clone();
    probe.k = *ks.first().ok_or(EvalError::Empty)?;
    let run = run_pipeline(&probe, scenario)?;
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        if !(2..=4).contains(&k) {
            return Err(EvalError::ScenarioMismatch(format!("k {k} outside 2..=4")));
        }
        out.push(MetricReport {
            model: spec.model,
            adversary: spec.adversary,
            k,
            split: spec.split,
            seed: spec.seed,
            metrics: metrics_for_k(&run, k)?,
            train_time_s: run.train_time_s,
            infer_time_s: run.infer_time_s,
            peak_memory_mb: run.peak_memory_mb,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Spec files

struct Lines<'a> {
    entries: Vec<(usize, &'a str, &'a str)>,
}

fn lex_spec(text: &str) -> Result<Lines<'_>, EvalError> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(EvalError::Spec { line, message: format!("expected key = value, got {content:?}") });
        };
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(EvalError::Spec { line, message: format!("{key} has no value") });
        }
        entries.push((line, key, value));
    }
    Ok(Lines { entries })
}

fn parse_cell(s: &str) -> Result<CellIdentity, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected rat:arfcn:pci, got {s:?}"));
    }
    let rat: Rat = parts[0]
        .to_ascii_uppercase()
        .parse()
        .map_err(|e: crate::types::TypeError| e.to_string())?;
    let arfcn: u32 = parts[1].parse().map_err(|_| format!("bad arfcn {:?}", parts[1]))?;
    let pci: u16 = parts[2].parse().map_err(|_| format!("bad pci {:?}", parts[2]))?;
    CellIdentity::new(rat, arfcn, pci).map_err(|e| e.to_string())
}

pub fn parse_experiment(text: &str) -> Result<ExperimentSpec, EvalError> {
    let lines = lex_spec(text)?;
    let mut scenario: Option<PathBuf> = None;
    let mut model: Option<ModelKind> = None;
    let mut adversary: Option<AdversaryKind> = None;
    let mut k: Option<u32> = None;
    let mut split: Option<f64> = None;
    let mut seed: u64 = 0;
    let mut epochs: usize = TrainConfig::default().epochs;
    let mut holdout_cell: Option<CellIdentity> = None;
    let mut seen = Vec::new();
    for (line, key, value) in lines.entries {
        if seen.contains(&key) {
            return Err(EvalError::Spec { line, message: format!("duplicate key {key}") });
        }
        seen.push(key);
        let bad = |msg: String| EvalError::Spec { line, message: msg };
        match key {
            "scenario" => scenario = Some(PathBuf::from(value)),
            "model" => model = Some(value.parse().map_err(|e: crate::models::ModelError| bad(e.to_string()))?),
            "adversary" => adversary = Some(value.parse().map_err(bad)?),
            "k" => k = Some(value.parse().map_err(|_| bad(format!("bad k {value:?}")))?),
            "split" => split = Some(value.parse().map_err(|_| bad(format!("bad split {value:?}")))?),
            "seed" => seed = value.parse().map_err(|_| bad(format!("bad seed {value:?}")))?,
            "epochs" => epochs = value.parse().map_err(|_| bad(format!("bad epochs {value:?}")))?,
            "holdout_cell" => holdout_cell = Some(parse_cell(value).map_err(bad)?),
            other => return Err(bad(format!("unknown key {other}"))),
        }
    }
    let require = |name: &str| EvalError::Spec { line: 0, message: format!("missing required key {name}") };
    Ok(ExperimentSpec {
        scenario_path: scenario.ok_or_else(|| require("scenario"))?,
        model: model.ok_or_else(|| require("model"))?,
        adversary: adversary.ok_or_else(|| require("adversary"))?,
        k: k.ok_or_else(|| require("k"))?,
        split: split.ok_or_else(|| require("split"))?,
        seed,
        epochs,
        holdout_cell,
    })
}

/// Reads an experiment file and the scenario it names (resolved
/// relative to the experiment file's directory).
pub fn load_experiment(path: &Path) -> Result<(ExperimentSpec, Scenario), EvalError> {
    let text = std::fs::read_to_string(path)?;
    let spec = parse_experiment(&text)?;
    let scenario_path = match path.parent() {
        Some(dir) if !spec.scenario_path.is_absolute() => dir.join(&spec.scenario_path),
        _ => spec.scenario_path.clone(),
    };
    let scenario = parse_scenario(&std::fs::read_to_string(&scenario_path)?)?;
    Ok((spec, scenario))
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Scenario file per rogue presentation; an adversary listed in
    /// `adversaries` without a scenario here fails its rows.
    pub scenarios: Vec<(AdversaryKind, PathBuf)>,
    pub models: Vec<ModelKind>,
    pub adversaries: Vec<AdversaryKind>,
    pub ks: Vec<u32>,
    pub split: f64,
    pub seed: u64,
    pub epochs: usize,
    pub holdout_cell: Option<CellIdentity>,
}

#[derive(Debug, Clone)]
pub enum SweepRow {
    Done(MetricReport),
    Failed { model: ModelKind, adversary: AdversaryKind, k: u32, error: String },
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    let mut out = Vec::new();
    for part in value.split(',') {
        let part = part.trim();
        out.push(part.parse().map_err(|e| format!("{e} in list item {part:?}"))?);
    }
    Ok(out)
}

pub fn parse_sweep(text: &str) -> Result<SweepSpec, EvalError> {
    let lines = lex_spec(text)?;
    let mut scenarios = Vec::new();
    let mut models: Option<Vec<ModelKind>> = None;
    let mut adversaries: Option<Vec<AdversaryKind>> = None;
    let mut ks: Option<Vec<u32>> = None;
    let mut split: Option<f64> = None;
    let mut seed: u64 = 0;
    let mut epochs: usize = TrainConfig::default().epochs;
    let mut holdout_cell: Option<CellIdentity> = None;
    let mut seen = Vec::new();
    for (line, key, value) in lines.entries {
        if seen.contains(&key) {
            return Err(EvalError::Spec { line, message: format!("duplicate key {key}") });
        }
        seen.push(key);
        let bad = |msg: String| EvalError::Spec { line, message: msg };
        match key {
            "scenario.a1" => scenarios.push((AdversaryKind::A1, PathBuf::from(value))),
            "scenario.a2" => scenarios.push((AdversaryKind::A2, PathBuf::from(value))),
            "scenario.holdout" => scenarios.push((AdversaryKind::Holdout, PathBuf::from(value))),
            "models" => models = Some(parse_list(value).map_err(bad)?),
            "adversaries" => adversaries = Some(parse_list(value).map_err(bad)?),
            "ks" => ks = Some(parse_list(value).map_err(bad)?),
            "split" => split = Some(value.parse().map_err(|_| bad(format!("bad split {value:?}")))?),
            "seed" => seed = value.parse().map_err(|_| bad(format!("bad seed {value:?}")))?,
            "epochs" => epochs = value.parse().map_err(|_| bad(format!("bad epochs {value:?}")))?,
            "holdout_cell" => holdout_cell = Some(parse_cell(value).map_err(bad)?),
            other => return Err(bad(format!("unknown key {other}"))),
        }
    }
    let require = |name: &str| EvalError::Spec { line: 0, message: format!("missing required key {name}") };
    Ok(SweepSpec {
        scenarios,
        models: models.ok_or_else(|| require("models"))?,
        adversaries: adversaries.ok_or_else(|| require("adversaries"))?,
        ks: ks.ok_or_else(|| require("ks"))?,
        split: split.ok_or_else(|| require("split"))?,
        seed,
        epochs,
        holdout_cell,
    })
}

pub fn load_sweep(path: &Path) -> Result<(SweepSpec, Vec<(AdversaryKind, Scenario)>), EvalError> {
    let text = std::fs::read_to_string(path)?;
    let spec = parse_sweep(&text)?;
    let mut scenarios = Vec::new();
    for (kind, rel) in &spec.scenarios {
        let full = match path.parent() {
            Some(dir) if !rel.is_absolute() => dir.join(rel),
            _ => rel.clone(),
        };
        scenarios.push((*kind, parse_scenario(&std::fs::read_to_string(&full)?)?));
    }
    Ok((spec, scenarios))
}

/// Full cross product of models × adversaries × ks. Each (model,
/// adversary) pair trains once and is relabeled per k. Failures are
/// recorded as rows and never abort the rest of the sweep.
pub fn run_sweep<F: FnMut(&SweepRow)>(
    spec: &SweepSpec,
    scenarios: &[(AdversaryKind, Scenario)],
    mut progress: F,
) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &model in &spec.models {
        for &adversary in &spec.adversaries {
            let scenario = scenarios.iter().find(|(a, _)| *a == adversary).map(|(_, s)| s);
            let fail_all = |rows: &mut Vec<SweepRow>, progress: &mut F, error: String| {
                for &k in &spec.ks {
                    let row = SweepRow::Failed { model, adversary, k, error: error.clone() };
                    progress(&row);
                    rows.push(row);
                }
            };
            let Some(scenario) = scenario else {
                fail_all(&mut rows, &mut progress, "no scenario mapped to this adversary".into());
                continue;
            };
            let espec = ExperimentSpec {
                scenario_path: PathBuf::new(),
                model,
                adversary,
                k: spec.ks.first().copied().unwrap_or(2),
                split: spec.split,
                seed: spec.seed,
                epochs: spec.epochs,
                holdout_cell: if adversary == AdversaryKind::Holdout {
                    spec.holdout_cell
                } else {
                    None
                },
            };
            match run_experiment_over_ks(&espec, scenario, &spec.ks) {
                Ok(reports) => {
                    for report in reports {
                        let row = SweepRow::Done(report);
                        progress(&row);
                        rows.push(row);
                    }
                }
                Err(e) => fail_all(&mut rows, &mut progress, e.to_string()),
            }
        }
    }
    rows
}

pub const SWEEP_CSV_HEADER: &str =
    "model,adversary,k,split,seed,tp,tn,fp,fn,accuracy,precision,recall,f1,fpr,train_time_s,infer_time_s,peak_memory_mb,status";

/// Sweep CSV carries the timing and memory columns (not byte-stable
/// across runs) plus a status column so failed rows stay visible.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        match row {
            SweepRow::Done(r) => {
                out.push_str(&r.to_csv_row());
                out.push_str(&format!(
                    ",{:.3},{:.3},{:.1},ok\n",
                    r.train_time_s, r.infer_time_s, r.peak_memory_mb
                ));
            }
            SweepRow::Failed { model, adversary, k, error } => {
                out.push_str(&format!(
                    "{model},{adversary},{k},,,,,,,,,,,,,,,error: {}\n",
                    error.replace(',', ";")
                ));
            }
        }
    }
    out
}

/// Plain-text results table for terminal output.
pub fn sweep_table(rows: &[SweepRow]) -> String {
    let fmt_opt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.4}"),
        None => "NA".into(),
    };
    let mut out = String::new();
    out.push_str(&format!(
        "{:<8} {:<8} {:>2}  {:>8} {:>9} {:>8} {:>8} {:>8}  {:>8} {:>8} {:>8}\n",
        "model", "adver", "k", "acc", "prec", "recall", "f1", "fpr", "train_s", "infer_s", "mem_mb"
    ));
    for row in rows {
        match row {
            SweepRow::Done(r) => out.push_str(&format!(
                "{:<8} {:<8} {:>2}  {:>8.4} {:>9} {:>8} {:>8} {:>8}  {:>8.2} {:>8.3} {:>8.1}\n",
                r.model.to_string(),
                r.adversary.to_string(),
                r.k,
                r.metrics.accuracy,
                fmt_opt(r.metrics.precision),
                fmt_opt(r.metrics.recall),
                fmt_opt(r.metrics.f1),
                fmt_opt(r.metrics.fpr),
                r.train_time_s,
                r.infer_time_s,
                r.peak_memory_mb,
            )),
            SweepRow::Failed { model, adversary, k, error } => out.push_str(&format!(
                "{:<8} {:<8} {:>2}  FAILED: {error}\n",
                model.to_string(),
                adversary.to_string(),
                k
            )),
        }
    }
    out
}
