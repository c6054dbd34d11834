//! The detection engine: per-UE history buffers, per-second scoring
//! against the current (registry, model, threshold) snapshot, and the
//! summed-buffer retraining loop.
//!
//! Scoring and retraining share one state machine. Every indication
//! appends its second to the UE's ring buffer and is scored against the
//! snapshot in force; once the number of new seconds summed across UEs
//! reaches the retrain threshold, the union of all buffered seconds is
//! re-encoded against a freshly built registry, the model is retrained
//! from scratch, the threshold refit, and the whole snapshot swapped as
//! one unit — a verdict can never pair a model with another
//! generation's threshold.
//!
//! Retraining deliberately consumes the buffers as-is, flagged seconds
//! included: the monitoring loop it reproduces trusts recent telemetry
//! wholesale, which means an attacker who stays resident long enough
//! poisons the next generation. `exclude_flagged` opts into the
//! defensive variant that drops anomaly-flagged seconds from the
//! training union.

pub mod transport;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::codec::{TransportError, WireMessage};
use crate::e2node::E2Error;
use crate::models::{
    fit_threshold, train_model, Model, ModelBundle, ModelError, ModelKind, Threshold, TrainConfig,
};
use crate::types::{
    encode_second, registry_from_measurements, CellMeasurement, CellRegistry, TypeError,
};

pub const DEFAULT_BUFFER_CAPACITY_S: usize = 120;
pub const DEFAULT_RETRAIN_EVERY_S: u64 = 10;

#[derive(Debug, Error)]
pub enum XappError {
    #[error("model expects width {model} but registry encodes width {registry}")]
    WidthMismatch { model: usize, registry: usize },
    #[error("handshake rejected: {0}")]
    Rejected(String),
    #[error("gave up after {attempts} connection attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Node(#[from] E2Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Anomaly,
    Legitimate,
    /// Bootstrap mode before the first trained snapshot exists.
    Warmup,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Anomaly => "ANOMALY",
            Decision::Legitimate => "LEGITIMATE",
            Decision::Warmup => "WARMUP",
        })
    }
}

/// One scored second. `alpha`/`tau` are absent only for warmup verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub ue_id: String,
    pub second_index: u64,
    pub alpha: Option<f64>,
    pub tau: Option<f64>,
    pub generation: u64,
    pub decision: Decision,
}

impl Verdict {
    /// Sink line: `ue_id,second_index,alpha,tau,generation,decision`.
    pub fn to_line(&self) -> String {
        let num = |v: Option<f64>| match v {
            Some(x) => x.to_string(),
            None => "NA".to_string(),
        };
        format!(
            "{},{},{},{},{},{}",
            self.ue_id,
            self.second_index,
            num(self.alpha),
            num(self.tau),
            self.generation,
            self.decision
        )
    }
}

#[derive(Debug)]
struct SecondEntry {
    second_index: u64,
    measurements: Vec<CellMeasurement>,
    flagged: bool,
}

/// Ring of recent per-second batches for one UE. Oldest evicted first;
/// capacity is fixed at construction.
#[derive(Debug)]
pub struct UeBuffer {
    ring: VecDeque<SecondEntry>,
    capacity: usize,
}

impl UeBuffer {
    fn new(capacity: usize) -> Self {
        Self {
            ring: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    fn push(&mut self, entry: SecondEntry) {
        if self.ring.len() == self.capacity {
            self.ring.pop_front();
        }
        self.ring.push_back(entry);
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub kind: ModelKind,
    pub train: TrainConfig,
    pub buffer_capacity_s: usize,
    /// `None` freezes the model (no retraining ever).
    pub retrain_every_s: Option<u64>,
    pub exclude_flagged: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Ae,
            train: TrainConfig::default(),
            buffer_capacity_s: DEFAULT_BUFFER_CAPACITY_S,
            retrain_every_s: Some(DEFAULT_RETRAIN_EVERY_S),
            exclude_flagged: false,
        }
    }
}

#[derive(Debug)]
struct Snapshot {
    registry: CellRegistry,
    model: Model,
    threshold: Threshold,
    generation: u64,
}

#[derive(Debug, PartialEq)]
pub enum RetrainOutcome {
    /// Fewer new seconds than the trigger, or retraining disabled.
    NotDue,
    /// Snapshot swapped; carries the new generation.
    Swapped(u64),
    /// Training failed; the previous snapshot stays in force.
    Failed(String),
}

#[derive(Debug)]
pub struct Engine {
    cfg: EngineConfig,
    snapshot: Option<Snapshot>,
    buffers: BTreeMap<String, UeBuffer>,
    new_seconds: u64,
    expected_subscription: Option<u32>,
    dropped_foreign: u64,
}

impl Engine {
    /// Cold start: no model until the first retrain; verdicts are
    /// WARMUP in the meantime.
    pub fn bootstrap(cfg: EngineConfig) -> Self {
        Self {
            cfg,
            snapshot: None,
            buffers: BTreeMap::new(),
            new_seconds: 0,
            expected_subscription: None,
            dropped_foreign: 0,
        }
    }

    /// Starts from a serialized model (generation 0). The registry must
    /// encode exactly the width the model was trained on.
    pub fn pretrained(
        cfg: EngineConfig,
        bundle: ModelBundle,
        registry: CellRegistry,
    ) -> Result<Self, XappError> {
        if bundle.model.input_width() != registry.feature_width() {
            return Err(XappError::WidthMismatch {
                model: bundle.model.input_width(),
                registry: registry.feature_width(),
            });
        }
        let mut cfg = cfg;
        cfg.kind = bundle.model.kind();
        let mut engine = Self::bootstrap(cfg);
        engine.snapshot = Some(Snapshot {
            registry,
            model: bundle.model,
            threshold: bundle.threshold,
            generation: 0,
        });
        Ok(engine)
    }

    /// Restricts processing to one subscription id; anything else is
    /// dropped and counted.
    pub fn expect_subscription(&mut self, id: u32) {
        self.expected_subscription = Some(id);
    }

    pub fn generation(&self) -> u64 {
        self.snapshot.as_ref().map_or(0, |s| s.generation)
    }

    pub fn current_tau(&self) -> Option<f64> {
        self.snapshot.as_ref().map(|s| s.threshold.tau)
    }

    pub fn dropped_foreign(&self) -> u64 {
        self.dropped_foreign
    }

    /// Total seconds currently buffered across UEs.
    pub fn buffered_seconds(&self) -> usize {
        self.buffers.values().map(|b| b.len()).sum()
    }

    /// New (not yet consumed by a retrain) seconds across UEs.
    pub fn new_seconds(&self) -> u64 {
        self.new_seconds
    }

    /// Consumes one indication: buffers the second and scores it with
    /// the current snapshot. Non-indication frames and foreign
    /// subscriptions yield `None`.
    pub fn on_indication(&mut self, msg: &WireMessage) -> Result<Option<Verdict>, XappError> {
        let WireMessage::RicIndication {
            subscription_id,
            ue_id,
            second_index,
            measurements,
        } = msg
        else {
            return Ok(None);
        };
        if self
            .expected_subscription
            .is_some_and(|expected| *subscription_id != expected)
        {
            self.dropped_foreign += 1;
            return Ok(None);
        }
        let decoded: Vec<CellMeasurement> = measurements
            .iter()
            .map(|w| w.to_measurement())
            .collect::<Result<_, _>>()?;

        let verdict = match &self.snapshot {
            None => Verdict {
                ue_id: ue_id.clone(),
                second_index: *second_index,
                alpha: None,
                tau: None,
                generation: 0,
                decision: Decision::Warmup,
            },
            Some(snap) => {
                let vector = encode_second(ue_id, *second_index, &decoded, &snap.registry)?;
                let alpha = snap.model.score(&vector.features)?;
                let tau = snap.threshold.tau;
                let decision = if alpha > tau {
                    Decision::Anomaly
                } else {
                    Decision::Legitimate
                };
                Verdict {
                    ue_id: ue_id.clone(),
                    second_index: *second_index,
                    alpha: Some(alpha),
                    tau: Some(tau),
                    generation: snap.generation,
                    decision,
                }
            }
        };

        let buffer = self
            .buffers
            .entry(ue_id.clone())
            .or_insert_with(|| UeBuffer::new(self.cfg.buffer_capacity_s));
        buffer.push(SecondEntry {
            second_index: *second_index,
            measurements: decoded,
            flagged: verdict.decision == Decision::Anomaly,
        });
        self.new_seconds += 1;
        Ok(Some(verdict))
    }

    /// Retrains when the summed new seconds reach the trigger. The
    /// union of every buffered second (not just new ones) becomes the
    /// training set; the registry is rebuilt from it, so cells that
    /// appeared since the last generation gain slots.
    pub fn maybe_retrain(&mut self) -> RetrainOutcome {
        let Some(every) = self.cfg.retrain_every_s else {
            return RetrainOutcome::NotDue;
        };
        if self.new_seconds < every {
            return RetrainOutcome::NotDue;
        }
        match self.retrain() {
            Ok(generation) => RetrainOutcome::Swapped(generation),
            Err(e) => RetrainOutcome::Failed(e.to_string()),
        }
    }

    fn retrain(&mut self) -> Result<u64, XappError> {
        let include = |e: &SecondEntry| !(self.cfg.exclude_flagged && e.flagged);
        let registry = registry_from_measurements(
            self.buffers
                .values()
                .flat_map(|b| b.ring.iter())
                .filter(|e| include(e))
                .flat_map(|e| e.measurements.iter()),
        )?;
        let mut data = Vec::new();
        for (ue_id, buffer) in &self.buffers {
            for entry in buffer.ring.iter().filter(|e| include(e)) {
                let v = encode_second(ue_id, entry.second_index, &entry.measurements, &registry)?;
                data.push(v.features);
            }
        }
        let (model, _stats) = train_model(self.cfg.kind, &data, &self.cfg.train)?;
        let threshold = fit_threshold(&model, &data)?;
        let generation = self.generation() + 1;
        // Single assignment: scoring can never observe a half-updated
        // snapshot.
        self.snapshot = Some(Snapshot {
            registry,
            model,
            threshold,
            generation,
        });
        self.new_seconds = 0;
        Ok(generation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::WireMeasurement;
    use crate::models::THRESHOLD_PERCENTILE;
    use crate::types::{CellIdentity, Rat};

    fn cell(pci: u16) -> CellIdentity {
        CellIdentity::new(Rat::Nr, 620_000, pci).unwrap()
    }

    fn indication(ue: &str, second: u64, rsrp: f64) -> WireMessage {
        let m = CellMeasurement::new(cell(1), rsrp, -11.0, 12.0, second * 1000 + 100);
        WireMessage::RicIndication {
            subscription_id: 1,
            ue_id: ue.into(),
            second_index: second,
            measurements: vec![WireMeasurement::from_measurement(&m)],
        }
    }

    fn fast_cfg(kind: ModelKind) -> EngineConfig {
        EngineConfig {
            kind,
            train: TrainConfig {
                epochs: 5,
                ..TrainConfig::default()
            },
            ..EngineConfig::default()
        }
    }

    #[test]
    fn warmup_until_first_retrain() {
        let mut engine = Engine::bootstrap(fast_cfg(ModelKind::Ae));
        for s in 0..9 {
            let v = engine.on_indication(&indication("ue-a", s, -90.0)).unwrap().unwrap();
            assert_eq!(v.decision, Decision::Warmup);
            assert_eq!(v.alpha, None);
            assert_eq!(engine.maybe_retrain(), RetrainOutcome::NotDue);
        }
        let v = engine.on_indication(&indication("ue-a", 9, -90.0)).unwrap().unwrap();
        assert_eq!(v.decision, Decision::Warmup, "10th second still scored pre-swap");
        assert_eq!(engine.maybe_retrain(), RetrainOutcome::Swapped(1));
        let v = engine.on_indication(&indication("ue-a", 10, -90.0)).unwrap().unwrap();
        assert_eq!(v.generation, 1);
        assert_ne!(v.decision, Decision::Warmup);
    }

    #[test]
    fn retrain_sums_across_ues() {
        let mut engine = Engine::bootstrap(fast_cfg(ModelKind::Ae));
        for s in 0..5 {
            engine.on_indication(&indication("ue-a", s, -90.0)).unwrap();
            assert_eq!(engine.maybe_retrain(), RetrainOutcome::NotDue);
            engine.on_indication(&indication("ue-b", s, -95.0)).unwrap();
            if s < 4 {
                assert_eq!(engine.maybe_retrain(), RetrainOutcome::NotDue);
            }
        }
        // 5 + 5 = 10 new seconds across two UEs.
        assert_eq!(engine.maybe_retrain(), RetrainOutcome::Swapped(1));
        assert_eq!(engine.new_seconds(), 0);
    }

    #[test]
    fn alpha_equal_tau_is_legitimate() {
        // A constant stream trains to a constant score; the fitted tau
        // of a constant sample is that same score bit-for-bit, so the
        // next identical second exercises the alpha == tau boundary.
        let mut engine = Engine::bootstrap(fast_cfg(ModelKind::IForest));
        for s in 0..10 {
            engine.on_indication(&indication("ue-a", s, -90.0)).unwrap();
        }
        assert_eq!(engine.maybe_retrain(), RetrainOutcome::Swapped(1));
        let v = engine.on_indication(&indication("ue-a", 10, -90.0)).unwrap().unwrap();
        let (alpha, tau) = (v.alpha.unwrap(), v.tau.unwrap());
        assert_eq!(alpha, tau, "constant dataset must hit the boundary exactly");
        assert_eq!(v.decision, Decision::Legitimate, "strict > spares the boundary");
    }

    #[test]
    fn empty_second_scores_as_zero_vector() {
        let mut engine = Engine::bootstrap(fast_cfg(ModelKind::Ae));
        for s in 0..10 {
            engine.on_indication(&indication("ue-a", s, -90.0)).unwrap();
        }
        engine.maybe_retrain();
        let empty = WireMessage::RicIndication {
            subscription_id: 1,
            ue_id: "ue-a".into(),
            second_index: 10,
            measurements: Vec::new(),
        };
        let v = engine.on_indication(&empty).unwrap().unwrap();
        assert!(v.alpha.is_some(), "all-zero vector is scored normally");
    }

    #[test]
    fn foreign_subscription_dropped_and_counted() {
        let mut engine = Engine::bootstrap(fast_cfg(ModelKind::Ae));
        engine.expect_subscription(7);
        let v = engine.on_indication(&indication("ue-a", 0, -90.0)).unwrap();
        assert!(v.is_none());
        assert_eq!(engine.dropped_foreign(), 1);
        assert_eq!(engine.buffered_seconds(), 0);
    }

    #[test]
    fn flagged_seconds_enter_training_union_by_default() {
        // Train on a calm stream, then feed an obvious outlier second
        // followed by enough calm seconds to trigger a retrain; the
        // outlier must be part of the union (the documented poisoning
        // caveat), which shows up as the threshold moving between the
        // exclude/include variants.
        let run = |exclude: bool| -> (f64, bool) {
            let mut cfg = fast_cfg(ModelKind::Ae);
            cfg.exclude_flagged = exclude;
            let mut engine = Engine::bootstrap(cfg);
            for s in 0..10 {
                engine.on_indication(&indication("ue-a", s, -90.0)).unwrap();
            }
            assert_eq!(engine.maybe_retrain(), RetrainOutcome::Swapped(1));
            // Outlier: a second crowded with strong unknown-cell traffic.
            let outlier = WireMessage::RicIndication {
                subscription_id: 1,
                ue_id: "ue-a".into(),
                second_index: 10,
                measurements: (0..8)
                    .map(|i| {
                        WireMeasurement::from_measurement(&CellMeasurement::new(
                            cell(400),
                            -40.0,
                            -5.0,
                            30.0,
                            10_000 + i * 20,
                        ))
                    })
                    .collect(),
            };
            let v = engine.on_indication(&outlier).unwrap().unwrap();
            let flagged = v.decision == Decision::Anomaly;
            for s in 11..20 {
                engine.on_indication(&indication("ue-a", s, -90.0)).unwrap();
            }
            assert_eq!(engine.maybe_retrain(), RetrainOutcome::Swapped(2));
            (engine.current_tau().unwrap(), flagged)
        };
        let (tau_with, flagged) = run(false);
        let (tau_without, _) = run(true);
        assert!(flagged, "outlier second must be flagged by generation 1");
        assert_ne!(
            tau_with, tau_without,
            "flagged second must reach the default training union"
        );
    }

    #[test]
    fn retrain_failure_keeps_previous_snapshot() {
        let mut cfg = fast_cfg(ModelKind::Ae);
        cfg.exclude_flagged = true;
        let mut engine = Engine::bootstrap(cfg);
        for s in 0..10 {
            engine.on_indication(&indication("ue-a", s, -90.0)).unwrap();
        }
        assert_eq!(engine.maybe_retrain(), RetrainOutcome::Swapped(1));
        // 120 empty seconds evict every measurement-bearing entry from
        // the ring, so the next training union has no measurements and
        // registry construction must fail.
        for s in 10..130 {
            let empty = WireMessage::RicIndication {
                subscription_id: 1,
                ue_id: "ue-a".into(),
                second_index: s,
                measurements: Vec::new(),
            };
            engine.on_indication(&empty).unwrap();
        }
        // Ring capacity 120 evicted every non-empty second; the union
        // is all-empty and training must fail.
        match engine.maybe_retrain() {
            RetrainOutcome::Failed(_) => {}
            other => panic!("expected failure, got {other:?}"),
        }
        assert_eq!(engine.generation(), 1, "previous snapshot retained");
        assert!(engine.current_tau().is_some());
    }

    #[test]
    fn pretrained_width_mismatch_rejected() {
        let data: Vec<Vec<f64>> = (0..20).map(|i| vec![0.1 * (i % 3) as f64; 8]).collect();
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let (model, _) = train_model(ModelKind::Ae, &data, &cfg).unwrap();
        let threshold = fit_threshold(&model, &data).unwrap();
        assert_eq!(threshold.percentile, THRESHOLD_PERCENTILE);
        let registry = registry_from_measurements(
            [
                CellMeasurement::new(cell(1), -90.0, -11.0, 10.0, 0),
                CellMeasurement::new(cell(2), -91.0, -12.0, 9.0, 0),
            ]
            .iter(),
        )
        .unwrap();
        // Registry width = 4 * (2 + 1) = 12 ≠ 8.
        let err = Engine::pretrained(
            EngineConfig::default(),
            ModelBundle { model, threshold },
            registry,
        )
        .unwrap_err();
        assert!(matches!(err, XappError::WidthMismatch { model: 8, registry: 12 }));
    }

    #[test]
    fn verdict_lines_are_stable() {
        let v = Verdict {
            ue_id: "001010000000001".into(),
            second_index: 42,
            alpha: Some(0.015625),
            tau: Some(0.03125),
            generation: 3,
            decision: Decision::Legitimate,
        };
        assert_eq!(
            v.to_line(),
            "001010000000001,42,0.015625,0.03125,3,LEGITIMATE"
        );
        let w = Verdict {
            ue_id: "ue-a".into(),
            second_index: 0,
            alpha: None,
            tau: None,
            generation: 0,
            decision: Decision::Warmup,
        };
        assert_eq!(w.to_line(), "ue-a,0,NA,NA,0,WARMUP");
    }
}
