//! Domain types shared across the pipeline: cell identities, per-cell
//! measurements, UE measurement reports, the cell registry, and the
//! per-second telemetry vectors consumed by the detection models.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Reportable RSRP range in dBm, used as normalization and clamping bounds.
pub const RSRP_RANGE: (f64, f64) = (-156.0, -31.0);
/// Reportable RSRQ range in dB.
pub const RSRQ_RANGE: (f64, f64) = (-43.0, 20.0);
/// Reportable SINR range in dB.
pub const SINR_RANGE: (f64, f64) = (-23.0, 40.0);

/// Per-slot appearance cap when encoding one second of telemetry.
pub const COUNT_CAP: u32 = 8;

/// Features per registry slot: (count_norm, rsrp_norm, rsrq_norm, sinr_norm).
pub const FEATURES_PER_SLOT: usize = 4;

/// Errors raised by domain-type construction and encoding.
#[derive(Debug, Error)]
pub enum TypeError {
    #[error("invalid cell identity: {0}")]
    InvalidCellIdentity(String),
    #[error("invalid measurement report: {0}")]
    InvalidReport(String),
    #[error("empty training corpus")]
    EmptyTrainingCorpus,
    #[error("window violation: timestamp {timestamp_ms} ms outside second {second_index}")]
    WindowViolation { timestamp_ms: u64, second_index: u64 },
    #[error("registry parse error at line {line}: {message}")]
    RegistryParse { line: usize, message: String },
}

/// Radio access technology of a cell.
///
/// The derived ordering (`Eutra < Nr`) fixes the registry slot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rat {
    Eutra,
    Nr,
}

impl Rat {
    /// Largest valid physical cell identity for this RAT.
    pub fn max_pci(self) -> u16 {
        match self {
            Rat::Eutra => 503,
            Rat::Nr => 1007,
        }
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rat::Eutra => write!(f, "EUTRA"),
            Rat::Nr => write!(f, "NR"),
        }
    }
}

impl FromStr for Rat {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "EUTRA" => Ok(Rat::Eutra),
            "NR" => Ok(Rat::Nr),
            other => Err(TypeError::InvalidCellIdentity(format!(
                "unknown RAT tag {other:?}"
            ))),
        }
    }
}

/// A cell as identified over the air: carrier channel number, physical
/// cell identity, and radio technology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIdentity {
    pub rat: Rat,
    pub arfcn: u32,
    pub pci: u16,
}

impl CellIdentity {
    /// Builds a cell identity, enforcing the per-RAT PCI range and a
    /// nonzero channel number.
    pub fn new(rat: Rat, arfcn: u32, pci: u16) -> Result<Self, TypeError> {
        if arfcn == 0 {
            return Err(TypeError::InvalidCellIdentity("arfcn must be > 0".into()));
        }
        if pci > rat.max_pci() {
            return Err(TypeError::InvalidCellIdentity(format!(
                "pci {pci} out of range for {rat} (max {})",
                rat.max_pci()
            )));
        }
        Ok(Self { rat, arfcn, pci })
    }
}

impl fmt::Display for CellIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.rat, self.arfcn, self.pci)
    }
}

/// One observed cell sample: signal power/quality/SINR at a timestamp.
///
/// Values are clamped to the reportable ranges at construction, so a
/// stored measurement is always in range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMeasurement {
    pub cell: CellIdentity,
    pub rsrp: f64,
    pub rsrq: f64,
    pub sinr: f64,
    pub timestamp_ms: u64,
}

impl CellMeasurement {
    pub fn new(cell: CellIdentity, rsrp: f64, rsrq: f64, sinr: f64, timestamp_ms: u64) -> Self {
        Self {
            cell,
            rsrp: rsrp.clamp(RSRP_RANGE.0, RSRP_RANGE.1),
            rsrq: rsrq.clamp(RSRQ_RANGE.0, RSRQ_RANGE.1),
            sinr: sinr.clamp(SINR_RANGE.0, SINR_RANGE.1),
            timestamp_ms,
        }
    }

    /// Second window this sample falls into.
    pub fn second_index(&self) -> u64 {
        self.timestamp_ms / 1000
    }
}

/// How a measurement report was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportSource {
    Periodic,
    Event,
    Ml1,
}

impl fmt::Display for ReportSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportSource::Periodic => write!(f, "PERIODIC"),
            ReportSource::Event => write!(f, "EVENT"),
            ReportSource::Ml1 => write!(f, "ML1"),
        }
    }
}

impl FromStr for ReportSource {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PERIODIC" => Ok(ReportSource::Periodic),
            "EVENT" => Ok(ReportSource::Event),
            "ML1" => Ok(ReportSource::Ml1),
            other => Err(TypeError::InvalidReport(format!(
                "unknown report source {other:?}"
            ))),
        }
    }
}

/// A UE-attributed batch of cell measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementReport {
    pub ue_id: String,
    pub concealed: bool,
    pub serving: CellIdentity,
    pub neighbors: Vec<CellMeasurement>,
    pub source: ReportSource,
}

impl MeasurementReport {
    /// Builds a report, enforcing a non-empty measurement list, the
    /// 1000 ms intra-report span bound, and the subscriber id format
    /// (15 decimal digits unless the id is a concealed pseudonym).
    pub fn new(
        ue_id: String,
        concealed: bool,
        serving: CellIdentity,
        neighbors: Vec<CellMeasurement>,
        source: ReportSource,
    ) -> Result<Self, TypeError> {
        if neighbors.is_empty() {
            return Err(TypeError::InvalidReport("no measurements".into()));
        }
        let lo = neighbors.iter().map(|m| m.timestamp_ms).min().unwrap();
        let hi = neighbors.iter().map(|m| m.timestamp_ms).max().unwrap();
        if hi - lo > 1000 {
            return Err(TypeError::InvalidReport(format!(
                "timestamps span {} ms (> 1000 ms)",
                hi - lo
            )));
        }
        validate_ue_id(&ue_id, concealed)?;
        Ok(Self {
            ue_id,
            concealed,
            serving,
            neighbors,
            source,
        })
    }

    /// Earliest measurement timestamp in the report.
    pub fn first_timestamp_ms(&self) -> u64 {
        self.neighbors.iter().map(|m| m.timestamp_ms).min().unwrap_or(0)
    }
}

fn validate_ue_id(ue_id: &str, concealed: bool) -> Result<(), TypeError> {
    if ue_id.is_empty() || ue_id.len() > 255 || !ue_id.is_ascii() {
        return Err(TypeError::InvalidReport(format!(
            "ue_id {ue_id:?} must be non-empty ASCII of at most 255 bytes"
        )));
    }
    if !concealed && (ue_id.len() != 15 || !ue_id.bytes().all(|b| b.is_ascii_digit())) {
        return Err(TypeError::InvalidReport(format!(
            "ue_id {ue_id:?} is not a 15-digit subscriber identifier"
        )));
    }
    Ok(())
}

/// Mapping from observed cell identities to fixed feature slots, built
/// from training data. The slot after the last registered cell is the
/// aggregate channel for cells missing from the registry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellRegistry {
    cells: Vec<CellIdentity>,
    index: BTreeMap<CellIdentity, usize>,
}

impl CellRegistry {
    /// Number of registered cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Slot reserved for cells that were never seen in training.
    pub fn unknown_slot(&self) -> usize {
        self.cells.len()
    }

    /// Slot for a cell, routing unregistered identities to the unknown slot.
    pub fn slot_of(&self, cell: &CellIdentity) -> usize {
        *self.index.get(cell).unwrap_or(&self.unknown_slot())
    }

    /// Registered cells in slot order.
    pub fn cells(&self) -> &[CellIdentity] {
        &self.cells
    }

    /// Width of the per-second feature vector this registry produces.
    pub fn feature_width(&self) -> usize {
        FEATURES_PER_SLOT * (self.cells.len() + 1)
    }

    /// Line-oriented text form: a header row followed by one
    /// `rat,arfcn,pci,slot` row per cell, sorted by slot.
    pub fn to_text(&self) -> String {
        let mut out = format!("version=1,slots={}\n", self.cells.len());
        for (slot, cell) in self.cells.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                cell.rat, cell.arfcn, cell.pci, slot
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TypeError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(TypeError::RegistryParse { line: 1, message: "empty registry".into() })?;
        let slots: usize = header
            .strip_prefix("version=1,slots=")
            .and_then(|s| s.parse().ok())
            .ok_or(TypeError::RegistryParse {
                line: 1,
                message: format!("bad header {header:?}"),
            })?;
        let mut cells = Vec::with_capacity(slots);
        for (idx, line) in lines {
            let line_no = idx + 1;
            let parse = |msg: &str| TypeError::RegistryParse {
                line: line_no,
                message: msg.into(),
            };
            let mut parts = line.split(',');
            let rat: Rat = parts.next().ok_or_else(|| parse("missing rat"))?.parse()?;
            let arfcn: u32 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse("bad arfcn"))?;
            let pci: u16 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse("bad pci"))?;
            let slot: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse("bad slot"))?;
            if slot != cells.len() {
                return Err(parse(&format!("slot {slot} out of order")));
            }
            cells.push(CellIdentity::new(rat, arfcn, pci)?);
        }
        if cells.len() != slots {
            return Err(TypeError::RegistryParse {
                line: cells.len() + 1,
                message: format!("header declares {slots} slots, found {}", cells.len()),
            });
        }
        let index = cells.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        Ok(Self { cells, index })
    }
}

/// Builds the registry of known cells from a training corpus.
///
/// Slot order is the sorted order of the distinct `(rat, arfcn, pci)`
/// triples observed among the measurements, so the same training set
/// always yields the same registry regardless of report order.
pub fn build_registry(reports: &[MeasurementReport]) -> Result<CellRegistry, TypeError> {
    registry_from_measurements(reports.iter().flat_map(|r| &r.neighbors))
}

/// Same as [`build_registry`] but over bare measurements, for callers
/// that hold per-second batches rather than whole reports.
pub fn registry_from_measurements<'a, I>(measurements: I) -> Result<CellRegistry, TypeError>
where
    I: IntoIterator<Item = &'a CellMeasurement>,
{
    let mut seen: BTreeMap<CellIdentity, usize> = BTreeMap::new();
    let mut any = false;
    for m in measurements {
        any = true;
        seen.entry(m.cell).or_insert(0);
    }
    if !any {
        return Err(TypeError::EmptyTrainingCorpus);
    }
    let cells: Vec<CellIdentity> = seen.keys().copied().collect();
    let index = cells.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    Ok(CellRegistry { cells, index })
}

/// The per-second fixed-width feature vector fed to the models.
///
/// Layout is slot-major: four features per registered slot in registry
/// order, then the unknown-cell slot. `rogue_count` is ground truth
/// attached only by the evaluation harness; it never reaches a model.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryVector {
    pub ue_id: String,
    pub second_index: u64,
    pub features: Vec<f64>,
    pub rogue_count: Option<u32>,
}

/// Min-max normalization onto `[0, 1]` with clamping of out-of-range input.
pub fn normalize_measurement(raw: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo < hi);
    ((raw - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Encodes the measurements of one wall-clock second into a telemetry vector.
///
/// Per slot: `count_norm = min(appearances, 8)/8`, and the per-slot means
/// of rsrp/rsrq/sinr normalized onto `[0, 1]`. Cells missing from the
/// registry accumulate into the unknown slot. Slots with no appearances
/// encode as all zeros.
pub fn encode_second(
    ue_id: &str,
    second_index: u64,
    measurements: &[CellMeasurement],
    registry: &CellRegistry,
) -> Result<TelemetryVector, TypeError> {
    let slots = registry.cells.len() + 1;
    let mut counts = vec![0u32; slots];
    let mut sums = vec![[0.0f64; 3]; slots];
    // Accumulate in a canonical order so the result is bitwise identical
    // no matter how the caller interleaved the measurements (f64 addition
    // is not associative).
    let mut ordered: Vec<(usize, &CellMeasurement)> = Vec::with_capacity(measurements.len());
    for m in measurements {
        if m.second_index() != second_index {
            return Err(TypeError::WindowViolation {
                timestamp_ms: m.timestamp_ms,
                second_index,
            });
        }
        ordered.push((registry.slot_of(&m.cell), m));
    }
    ordered.sort_by(|(sa, a), (sb, b)| {
        sa.cmp(sb)
            .then(a.timestamp_ms.cmp(&b.timestamp_ms))
            .then(a.rsrp.total_cmp(&b.rsrp))
            .then(a.rsrq.total_cmp(&b.rsrq))
            .then(a.sinr.total_cmp(&b.sinr))
    });
    for (slot, m) in ordered {
        counts[slot] += 1;
        sums[slot][0] += m.rsrp;
        sums[slot][1] += m.rsrq;
        sums[slot][2] += m.sinr;
    }
    let mut features = vec![0.0f64; FEATURES_PER_SLOT * slots];
    for slot in 0..slots {
        if counts[slot] == 0 {
            continue;
        }
        let n = counts[slot] as f64;
        let base = slot * FEATURES_PER_SLOT;
        features[base] = counts[slot].min(COUNT_CAP) as f64 / COUNT_CAP as f64;
        features[base + 1] = normalize_measurement(sums[slot][0] / n, RSRP_RANGE.0, RSRP_RANGE.1);
        features[base + 2] = normalize_measurement(sums[slot][1] / n, RSRQ_RANGE.0, RSRQ_RANGE.1);
        features[base + 3] = normalize_measurement(sums[slot][2] / n, SINR_RANGE.0, SINR_RANGE.1);
    }
    Ok(TelemetryVector {
        ue_id: ue_id.to_string(),
        second_index,
        features,
        rogue_count: None,
    })
}
