//! Evaluation: per-second ground-truth labeling, confusion-matrix
//! metrics, single experiments, and model × threshold sweeps.
//!
//! A second is labeled anomalous when the rogue identity appears at
//! least `k` times among its measurements (the per-second rogue cell
//! count). Ratios with a zero denominator are reported as explicit NA,
//! never silently as zero.

pub mod experiment;

use std::fmt;

use thiserror::Error;

use crate::models::ModelError;
use crate::sim::SimError;
use crate::types::TypeError;
use crate::xapp::XappError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("predictions ({predictions}) and labels ({labels}) differ in length")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("experiment spec error at line {line}: {message}")]
    Spec { line: usize, message: String },
    #[error("scenario does not fit the experiment: {0}")]
    ScenarioMismatch(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Xapp(#[from] XappError),
    #[error(transparent)]
    Node(#[from] crate::e2node::E2Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// ANOMALOUS iff the per-second rogue cell count reaches `k`.
pub fn label_seconds(rogue_counts: &[u32], k: u32) -> Vec<bool> {
    rogue_counts.iter().map(|&c| c >= k).collect()
}

/// Confusion counts plus the derived rates. `None` marks a rate whose
/// denominator was zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub true_pos: u64,
    pub true_neg: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub fpr: Option<f64>,
}

pub fn compute_metrics(predictions: &[bool], labels: &[bool]) -> Result<Metrics, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    let (mut tp, mut tn, mut fp, mut fne) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
        }
    }
    let total = (tp + tn + fp + fne) as f64;
    let ratio = |num: u64, den: u64| -> Option<f64> {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fne);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Ok(Metrics {
        true_pos: tp,
        true_neg: tn,
        false_pos: fp,
        false_neg: fne,
        accuracy: (tp + tn) as f64 / total,
        precision,
        recall,
        f1,
        fpr: ratio(fp, fp + tn),
    })
}

/// Which rogue presentation an experiment evaluates. `Holdout` removes
/// a real cell from training and reintroduces it at inference, so the
/// detector faces an unknown identity without any simulated attacker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversaryKind {
    A1,
    A2,
    Holdout,
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdversaryKind::A1 => "a1",
            AdversaryKind::A2 => "a2",
            AdversaryKind::Holdout => "holdout",
        })
    }
}

impl std::str::FromStr for AdversaryKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a1" => Ok(AdversaryKind::A1),
            "a2" => Ok(AdversaryKind::A2),
            "holdout" => Ok(AdversaryKind::Holdout),
            other => Err(format!("unknown adversary {other:?} (a1|a2|holdout)")),
        }
    }
}

fn fmt_rate(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "NA".to_string(),
    }
}

/// One evaluated experiment. The metric fields are deterministic in
/// (spec, seed); the timing and memory fields are not.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub model: crate::models::ModelKind,
    pub adversary: AdversaryKind,
    pub k: u32,
    pub split: f64,
    pub seed: u64,
    pub metrics: Metrics,
    pub train_time_s: f64,
    pub infer_time_s: f64,
    pub peak_memory_mb: f64,
}

pub const METRICS_CSV_HEADER: &str =
    "model,adversary,k,split,seed,tp,tn,fp,fn,accuracy,precision,recall,f1,fpr";

impl MetricReport {
    /// Deterministic CSV row (no timing columns, see module docs).
    pub fn to_csv_row(&self) -> String {
        let m = &self.metrics;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.model,
            self.adversary,
            self.k,
            self.split,
            self.seed,
            m.true_pos,
            m.true_neg,
            m.false_pos,
            m.false_neg,
            fmt_rate(Some(m.accuracy)),
            fmt_rate(m.precision),
            fmt_rate(m.recall),
            fmt_rate(m.f1),
            fmt_rate(m.fpr),
        )
    }
}

/// CSV for `evaluate`: header plus one row per report, byte-identical
/// across runs of the same spec and seed.
pub fn metrics_csv(reports: &[MetricReport]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}
