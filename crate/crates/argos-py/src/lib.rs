//! Python bindings for the rogue base station detection pipeline.
//!
//! The module mirrors the main library surface: scenario parsing and
//! simulation, per-second feature encoding, model training and scoring
//! with a calibrated threshold, the streaming detection engine, the
//! experiment evaluator, and the binary wire codec.
//!
//! ```python
//! import argos
//! scn = argos.Scenario.from_file("scenarios/smoke.scn")
//! csv_text = scn.simulate_csv()
//! model = argos.Model.train(vectors, kind="ae", epochs=40, seed=3)
//! alpha = model.score(vectors[0])
//! ```

use std::str::FromStr;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict, PyList};

use argos_core::codec;
use argos_core::eval::experiment::{load_experiment, run_experiment};
use argos_core::eval::MetricReport;
use argos_core::models::{
    fit_threshold, load_model, save_model, train_model, ModelBundle, ModelKind, TrainConfig,
};
use argos_core::sim::{self, parse_scenario, scenario_to_text};
use argos_core::types::{
    encode_second as core_encode_second, registry_from_measurements, CellIdentity,
    CellMeasurement, Rat,
};
use argos_core::xapp::{Decision, Engine, EngineConfig, RetrainOutcome, Verdict};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// "RAT:arfcn:pci" (e.g. "EUTRA:300:101", case-insensitive RAT).
fn parse_cell(s: &str) -> PyResult<CellIdentity> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(PyValueError::new_err(format!(
            "cell {s:?}: expected RAT:arfcn:pci"
        )));
    }
    let rat = Rat::from_str(&parts[0].to_ascii_uppercase()).map_err(value_err)?;
    let arfcn: u32 = parts[1]
        .parse()
        .map_err(|_| PyValueError::new_err(format!("cell {s:?}: bad arfcn")))?;
    let pci: u16 = parts[2]
        .parse()
        .map_err(|_| PyValueError::new_err(format!("cell {s:?}: bad pci")))?;
    CellIdentity::new(rat, arfcn, pci).map_err(value_err)
}

fn cell_to_string(cell: &CellIdentity) -> String {
    format!("{}:{}:{}", cell.rat, cell.arfcn, cell.pci)
}

/// (rat, arfcn, pci, rsrp_db, rsrq_db, sinr_db, timestamp_ms)
type MeasurementTuple = (String, u32, u16, f64, f64, f64, u64);

fn measurement_from_tuple(t: &MeasurementTuple) -> PyResult<CellMeasurement> {
    let rat = Rat::from_str(&t.0.to_ascii_uppercase()).map_err(value_err)?;
    let cell = CellIdentity::new(rat, t.1, t.2).map_err(value_err)?;
    Ok(CellMeasurement::new(cell, t.3, t.4, t.5, t.6))
}

fn measurements_from_tuples(ts: &[MeasurementTuple]) -> PyResult<Vec<CellMeasurement>> {
    ts.iter().map(measurement_from_tuple).collect()
}

// ---------------------------------------------------------------------------
// Scenario

/// A parsed simulation scenario: cell sites, walking subscribers,
/// propagation parameters, and optionally one rogue transmitter.
#[pyclass(frozen)]
struct Scenario {
    inner: sim::Scenario,
}

#[pymethods]
impl Scenario {
    /// Parses scenario text (the same format the CLI reads).
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse_scenario(text).map_err(value_err)?,
        })
    }

    /// Reads and parses a scenario file.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        Self::from_text(&text)
    }

    /// Canonical text form of the scenario.
    fn text(&self) -> String {
        scenario_to_text(&self.inner)
    }

    #[getter]
    fn duration_s(&self) -> u64 {
        self.inner.config.duration_s
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.config.seed
    }

    #[getter]
    fn ml1_rate_hz(&self) -> u32 {
        self.inner.config.ml1_rate_hz
    }

    #[getter]
    fn cells(&self) -> Vec<String> {
        self.inner
            .config
            .cells
            .iter()
            .map(|site| cell_to_string(&site.cell))
            .collect()
    }

    #[getter]
    fn ue_ids(&self) -> Vec<String> {
        self.inner
            .config
            .ues
            .iter()
            .map(|ue| ue.ue_id.clone())
            .collect()
    }

    #[getter]
    fn has_adversary(&self) -> bool {
        self.inner.adversary.is_some()
    }

    /// Runs the full simulation and returns the labeled measurement
    /// stream as CSV text — identical to the CLI `simulate` output.
    fn simulate_csv(&self) -> PyResult<String> {
        let stream = self.inner.generate().map_err(runtime_err)?;
        let mut buf = Vec::new();
        sim::csv::write_csv(&mut buf, &stream).map_err(runtime_err)?;
        String::from_utf8(buf).map_err(runtime_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(cells={}, ues={}, duration_s={}, adversary={})",
            self.inner.config.cells.len(),
            self.inner.config.ues.len(),
            self.inner.config.duration_s,
            self.inner.adversary.is_some()
        )
    }
}

// ---------------------------------------------------------------------------
// Model

/// A trained anomaly model plus its calibrated detection threshold.
#[pyclass(frozen)]
struct Model {
    bundle: ModelBundle,
}

#[pymethods]
impl Model {
    /// Trains a model on per-second feature vectors and calibrates the
    /// detection threshold on the same data.
    ///
    /// `kind` is one of "ae", "dae", "vae", "iforest".
    #[staticmethod]
    #[pyo3(signature = (vectors, kind="ae", epochs=50, seed=0, learning_rate=1e-3, batch_size=32))]
    fn train(
        vectors: Vec<Vec<f64>>,
        kind: &str,
        epochs: usize,
        seed: u64,
        learning_rate: f64,
        batch_size: usize,
    ) -> PyResult<Self> {
        let kind = ModelKind::from_str(kind).map_err(value_err)?;
        let cfg = TrainConfig {
            seed,
            epochs,
            learning_rate,
            batch_size,
            momentum: TrainConfig::default().momentum,
        };
        let (model, _stats) = train_model(kind, &vectors, &cfg).map_err(value_err)?;
        let threshold = fit_threshold(&model, &vectors).map_err(value_err)?;
        Ok(Self {
            bundle: ModelBundle { model, threshold },
        })
    }

    /// Loads a model blob written by `save` or the CLI `train` command.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            bundle: load_model(std::path::Path::new(path))
                .map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?,
        })
    }

    /// Writes the model and threshold in the binary blob format the CLI
    /// `detect` command consumes.
    fn save(&self, path: &str) -> PyResult<()> {
        save_model(std::path::Path::new(path), &self.bundle)
            .map_err(|e| PyIOError::new_err(format!("{path}: {e}")))
    }

    /// Anomaly score of one feature vector (reconstruction error for
    /// the autoencoder family, isolation score for the forest).
    fn score(&self, vector: Vec<f64>) -> PyResult<f64> {
        self.bundle.model.score(&vector).map_err(value_err)
    }

    /// Scores a batch of feature vectors.
    fn scores(&self, vectors: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        vectors
            .iter()
            .map(|v| self.bundle.model.score(v).map_err(value_err))
            .collect()
    }

    #[getter]
    fn kind(&self) -> String {
        self.bundle.model.kind().to_string()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.bundle.threshold.tau
    }

    #[getter]
    fn input_width(&self) -> usize {
        self.bundle.model.input_width()
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(kind={}, input_width={}, tau={:.6})",
            self.bundle.model.kind(),
            self.bundle.model.input_width(),
            self.bundle.threshold.tau
        )
    }
}

// ---------------------------------------------------------------------------
// Detector

fn verdict_dict<'py>(py: Python<'py>, v: &Verdict) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("ue_id", &v.ue_id)?;
    d.set_item("second_index", v.second_index)?;
    d.set_item("alpha", v.alpha)?;
    d.set_item("tau", v.tau)?;
    d.set_item("generation", v.generation)?;
    d.set_item(
        "decision",
        match v.decision {
            Decision::Warmup => "WARMUP",
            Decision::Legitimate => "LEGITIMATE",
            Decision::Anomaly => "ANOMALY",
        },
    )?;
    Ok(d)
}

/// The streaming detection engine: buffers per-second measurements per
/// subscriber, scores each second against the current model snapshot,
/// and periodically retrains on the buffered window.
#[pyclass]
struct Detector {
    engine: Engine,
}

#[pymethods]
impl Detector {
    /// Cold start: no model until the first retrain; decisions are
    /// WARMUP until `retrain_every_s` new seconds have been buffered.
    #[staticmethod]
    #[pyo3(signature = (kind="ae", retrain_every_s=600, epochs=50, seed=0, buffer_capacity_s=3600, exclude_flagged=false))]
    fn bootstrap(
        kind: &str,
        retrain_every_s: u64,
        epochs: usize,
        seed: u64,
        buffer_capacity_s: usize,
        exclude_flagged: bool,
    ) -> PyResult<Self> {
        let cfg = EngineConfig {
            kind: ModelKind::from_str(kind).map_err(value_err)?,
            train: TrainConfig {
                seed,
                epochs,
                ..TrainConfig::default()
            },
            buffer_capacity_s,
            retrain_every_s: if retrain_every_s == 0 {
                None
            } else {
                Some(retrain_every_s)
            },
            exclude_flagged,
        };
        Ok(Self {
            engine: Engine::bootstrap(cfg),
        })
    }

    /// Starts from a trained model, scoring immediately. `cells` fixes
    /// the feature slots and must list the cells the model was trained
    /// on, as "RAT:arfcn:pci" strings. `retrain_every_s=0` freezes the
    /// model.
    #[staticmethod]
    #[pyo3(signature = (model, cells, retrain_every_s=0, epochs=50, seed=0, buffer_capacity_s=3600, exclude_flagged=false))]
    #[allow(clippy::too_many_arguments)]
    fn pretrained(
        model: &Model,
        cells: Vec<String>,
        retrain_every_s: u64,
        epochs: usize,
        seed: u64,
        buffer_capacity_s: usize,
        exclude_flagged: bool,
    ) -> PyResult<Self> {
        let parsed: Vec<CellIdentity> = cells
            .iter()
            .map(|s| parse_cell(s))
            .collect::<PyResult<_>>()?;
        // The registry builder works from observed measurements; feed it
        // one synthetic sample per cell (values are irrelevant, only the
        // identities register).
        let samples: Vec<CellMeasurement> = parsed
            .iter()
            .map(|&cell| CellMeasurement::new(cell, -100.0, -10.0, 0.0, 0))
            .collect();
        let registry = registry_from_measurements(samples.iter()).map_err(value_err)?;
        let cfg = EngineConfig {
            kind: model.bundle.model.kind(),
            train: TrainConfig {
                seed,
                epochs,
                ..TrainConfig::default()
            },
            buffer_capacity_s,
            retrain_every_s: if retrain_every_s == 0 {
                None
            } else {
                Some(retrain_every_s)
            },
            exclude_flagged,
        };
        Ok(Self {
            engine: Engine::pretrained(cfg, model.bundle.clone(), registry)
                .map_err(value_err)?,
        })
    }

    /// Scores one (subscriber, second) batch of measurements — each a
    /// (rat, arfcn, pci, rsrp, rsrq, sinr, timestamp_ms) tuple — and
    /// buffers it for future retraining. Returns the verdict dict.
    fn process<'py>(
        &mut self,
        py: Python<'py>,
        ue_id: &str,
        second_index: u64,
        measurements: Vec<MeasurementTuple>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let decoded = measurements_from_tuples(&measurements)?;
        let wire: Vec<codec::WireMeasurement> = decoded
            .iter()
            .map(codec::WireMeasurement::from_measurement)
            .collect();
        let msg = codec::WireMessage::RicIndication {
            subscription_id: 0,
            ue_id: ue_id.to_string(),
            second_index,
            measurements: wire,
        };
        let verdict = self
            .engine
            .on_indication(&msg)
            .map_err(value_err)?
            .ok_or_else(|| PyRuntimeError::new_err("indication was not processed"))?;
        verdict_dict(py, &verdict)
    }

    /// Retrains if enough new seconds accumulated. Returns "not_due",
    /// "swapped:<generation>", or raises on a training failure.
    fn maybe_retrain(&mut self) -> PyResult<String> {
        match self.engine.maybe_retrain() {
            RetrainOutcome::NotDue => Ok("not_due".into()),
            RetrainOutcome::Swapped(generation) => Ok(format!("swapped:{generation}")),
            RetrainOutcome::Failed(e) => Err(PyRuntimeError::new_err(e)),
        }
    }

    #[getter]
    fn generation(&self) -> u64 {
        self.engine.generation()
    }

    #[getter]
    fn tau(&self) -> Option<f64> {
        self.engine.current_tau()
    }

    #[getter]
    fn buffered_seconds(&self) -> usize {
        self.engine.buffered_seconds()
    }

    #[getter]
    fn new_seconds(&self) -> u64 {
        self.engine.new_seconds()
    }
}

// ---------------------------------------------------------------------------
// Functions

/// Encodes one (subscriber, second) batch of measurement tuples into
/// the fixed-width feature vector used by every model. `cells` pins the
/// feature slots, exactly like a training registry.
#[pyfunction]
fn encode_second(
    ue_id: &str,
    second_index: u64,
    measurements: Vec<MeasurementTuple>,
    cells: Vec<String>,
) -> PyResult<Vec<f64>> {
    let decoded = measurements_from_tuples(&measurements)?;
    let parsed: Vec<CellIdentity> = cells.iter().map(|s| parse_cell(s)).collect::<PyResult<_>>()?;
    let samples: Vec<CellMeasurement> = parsed
        .iter()
        .map(|&cell| CellMeasurement::new(cell, -100.0, -10.0, 0.0, 0))
        .collect();
    let registry = registry_from_measurements(samples.iter()).map_err(value_err)?;
    let vector =
        core_encode_second(ue_id, second_index, &decoded, &registry).map_err(value_err)?;
    Ok(vector.features)
}

fn report_dict<'py>(py: Python<'py>, r: &MetricReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("model", r.model.to_string())?;
    d.set_item("adversary", r.adversary.to_string())?;
    d.set_item("k", r.k)?;
    d.set_item("split", r.split)?;
    d.set_item("seed", r.seed)?;
    d.set_item("tp", r.metrics.true_pos)?;
    d.set_item("tn", r.metrics.true_neg)?;
    d.set_item("fp", r.metrics.false_pos)?;
    d.set_item("fn", r.metrics.false_neg)?;
    d.set_item("accuracy", r.metrics.accuracy)?;
    d.set_item("precision", r.metrics.precision)?;
    d.set_item("recall", r.metrics.recall)?;
    d.set_item("f1", r.metrics.f1)?;
    d.set_item("fpr", r.metrics.fpr)?;
    d.set_item("train_time_s", r.train_time_s)?;
    d.set_item("infer_time_s", r.infer_time_s)?;
    d.set_item("peak_memory_mb", r.peak_memory_mb)?;
    Ok(d)
}

/// Runs one experiment spec file end to end (simulate, train, stream,
/// score) and returns the metric report as a dict. Undefined rates
/// (zero denominators) come back as None.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, spec_path: &str) -> PyResult<Bound<'py, PyDict>> {
    let (spec, scenario) = load_experiment(std::path::Path::new(spec_path))
        .map_err(|e| PyValueError::new_err(format!("{spec_path}: {e}")))?;
    let report = run_experiment(&spec, &scenario).map_err(runtime_err)?;
    report_dict(py, &report)
}

// ---------------------------------------------------------------------------
// Wire codec

fn wire_message_dict<'py>(py: Python<'py>, msg: &codec::WireMessage) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    match msg {
        codec::WireMessage::SetupRequest {
            node_id,
            capabilities,
        } => {
            d.set_item("type", "setup_request")?;
            d.set_item("node_id", node_id)?;
            d.set_item("capabilities", capabilities.clone())?;
        }
        codec::WireMessage::SetupResponse { accepted } => {
            d.set_item("type", "setup_response")?;
            d.set_item("accepted", accepted)?;
        }
        codec::WireMessage::SubscriptionRequest {
            subscription_id,
            report_period_ms,
        } => {
            d.set_item("type", "subscription_request")?;
            d.set_item("subscription_id", subscription_id)?;
            d.set_item("report_period_ms", report_period_ms)?;
        }
        codec::WireMessage::SubscriptionResponse {
            subscription_id,
            accepted,
        } => {
            d.set_item("type", "subscription_response")?;
            d.set_item("subscription_id", subscription_id)?;
            d.set_item("accepted", accepted)?;
        }
        codec::WireMessage::RicIndication {
            subscription_id,
            ue_id,
            second_index,
            measurements,
        } => {
            d.set_item("type", "ric_indication")?;
            d.set_item("subscription_id", subscription_id)?;
            d.set_item("ue_id", ue_id)?;
            d.set_item("second_index", second_index)?;
            let list = PyList::empty(py);
            for w in measurements {
                let m = PyDict::new(py);
                m.set_item("rat", w.rat.to_string())?;
                m.set_item("arfcn", w.arfcn)?;
                m.set_item("pci", w.pci)?;
                m.set_item("rsrp", codec::from_centi_db(w.rsrp_cdb))?;
                m.set_item("rsrq", codec::from_centi_db(w.rsrq_cdb))?;
                m.set_item("sinr", codec::from_centi_db(w.sinr_cdb))?;
                m.set_item("timestamp_ms", w.timestamp_ms)?;
                list.append(m)?;
            }
            d.set_item("measurements", list)?;
        }
    }
    Ok(d)
}

fn get_field<'py, T: for<'a> FromPyObject<'a, 'py>>(
    d: &Bound<'py, PyDict>,
    key: &str,
) -> PyResult<T> {
    d.get_item(key)?
        .ok_or_else(|| PyValueError::new_err(format!("message is missing {key:?}")))?
        .extract()
        .map_err(|e| {
            let e: PyErr = e.into();
            PyValueError::new_err(format!("field {key:?}: {e}"))
        })
}

fn wire_message_from_dict(d: &Bound<'_, PyDict>) -> PyResult<codec::WireMessage> {
    let kind: String = get_field(d, "type")?;
    Ok(match kind.as_str() {
        "setup_request" => codec::WireMessage::SetupRequest {
            node_id: get_field(d, "node_id")?,
            capabilities: get_field(d, "capabilities")?,
        },
        "setup_response" => codec::WireMessage::SetupResponse {
            accepted: get_field(d, "accepted")?,
        },
        "subscription_request" => codec::WireMessage::SubscriptionRequest {
            subscription_id: get_field(d, "subscription_id")?,
            report_period_ms: get_field(d, "report_period_ms")?,
        },
        "subscription_response" => codec::WireMessage::SubscriptionResponse {
            subscription_id: get_field(d, "subscription_id")?,
            accepted: get_field(d, "accepted")?,
        },
        "ric_indication" => {
            let tuples: Vec<MeasurementTuple> = get_field(d, "measurements")
                .or_else(|_: PyErr| -> PyResult<Vec<MeasurementTuple>> {
                    // Also accept the dict form wire_decode produces.
                    let dicts: Vec<Bound<'_, PyDict>> = get_field(d, "measurements")?;
                    dicts
                        .iter()
                        .map(|m| {
                            Ok((
                                get_field(m, "rat")?,
                                get_field(m, "arfcn")?,
                                get_field(m, "pci")?,
                                get_field(m, "rsrp")?,
                                get_field(m, "rsrq")?,
                                get_field(m, "sinr")?,
                                get_field(m, "timestamp_ms")?,
                            ))
                        })
                        .collect()
                })?;
            let decoded = measurements_from_tuples(&tuples)?;
            codec::WireMessage::RicIndication {
                subscription_id: get_field(d, "subscription_id")?,
                ue_id: get_field(d, "ue_id")?,
                second_index: get_field(d, "second_index")?,
                measurements: decoded
                    .iter()
                    .map(codec::WireMeasurement::from_measurement)
                    .collect(),
            }
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown message type {other:?}"
            )))
        }
    })
}

/// Encodes a message dict into one framed byte string.
#[pyfunction]
fn wire_encode<'py>(py: Python<'py>, message: &Bound<'py, PyDict>) -> PyResult<Bound<'py, PyBytes>> {
    let msg = wire_message_from_dict(message)?;
    let bytes = codec::encode(&msg).map_err(value_err)?;
    Ok(PyBytes::new(py, &bytes))
}

/// Decodes one framed message from the front of `data`. Returns
/// (message_dict, bytes_consumed).
#[pyfunction]
fn wire_decode<'py>(py: Python<'py>, data: &[u8]) -> PyResult<(Bound<'py, PyDict>, usize)> {
    let (msg, used) = codec::decode(data).map_err(value_err)?;
    Ok((wire_message_dict(py, &msg)?, used))
}

#[pymodule]
fn argos(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Model>()?;
    m.add_class::<Detector>()?;
    m.add_function(wrap_pyfunction!(encode_second, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(wire_encode, m)?)?;
    m.add_function(wrap_pyfunction!(wire_decode, m)?)?;
    Ok(())
}
