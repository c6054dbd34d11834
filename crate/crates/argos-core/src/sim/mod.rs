//! Radio area simulation: configured cell sites, waypoint-driven UEs,
//! a log-distance propagation model with per-(cell, second) log-normal
//! shadowing, ML1-style periodic sampling, hysteresis event reports,
//! and rogue-cell injection.
//!
//! Two adversary modes mirror how rogue base stations present
//! themselves: A1 broadcasts a fresh identity absent from the
//! legitimate plan; A2 replicates a legitimate cell's identity from its
//! own position with a power offset, so the victim area sees both the
//! real and the fake transmitter under one identity.

pub mod csv;
pub mod scenario;

pub use csv::{ingest_csv, ingest_csv_path, load_csv, save_csv, CSV_HEADER};
pub use scenario::{parse_scenario, scenario_to_text};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::types::{CellIdentity, CellMeasurement, MeasurementReport, ReportSource, TypeError};

/// Cells below this receive power are invisible to the UE modem.
pub const DETECTION_THRESHOLD_DBM: f64 = -140.0;
/// Resource blocks assumed by the RSRQ definition RSRQ = N·RSRP/RSSI.
pub const RSRQ_N_RB: f64 = 52.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("scenario parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("adversary target {0} does not match any legitimate cell")]
    A2TargetNotFound(CellIdentity),
    #[error("adversary identity {0} collides with a legitimate cell")]
    A1IdentityCollision(CellIdentity),
    #[error("holdout cell {0} never appears in the stream")]
    HoldoutCellAbsent(CellIdentity),
    #[error("csv error at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// A legitimate cell site: identity plus physical placement.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSite {
    pub cell: CellIdentity,
    pub x: f64,
    pub y: f64,
    pub tx_power_dbm: f64,
}

/// One UE: identity, closed-loop waypoint path, and speed.
#[derive(Debug, Clone, PartialEq)]
pub struct UeConfig {
    pub ue_id: String,
    pub waypoints: Vec<(f64, f64)>,
    pub speed_mps: f64,
}

/// The simulated area and schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub cells: Vec<CellSite>,
    pub ues: Vec<UeConfig>,
    pub duration_s: u64,
    pub ml1_rate_hz: u32,
    pub hysteresis_db: f64,
    pub seed: u64,
}

/// Log-distance propagation with caller-visible parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationParams {
    pub pl0_db: f64,
    pub exponent: f64,
    pub shadowing_sigma_db: f64,
    pub noise_floor_dbm: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            pl0_db: 40.0,
            exponent: 3.0,
            shadowing_sigma_db: 2.0,
            noise_floor_dbm: -104.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversaryMode {
    A1,
    A2,
}

/// Rogue transmitter description.
///
/// For A1 `target` is the fresh identity it broadcasts and
/// `tx_power_dbm` its absolute power. For A2 `target` names the
/// impersonated legitimate cell and the effective power is that cell's
/// power plus `power_offset_db`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryConfig {
    pub mode: AdversaryMode,
    pub x: f64,
    pub y: f64,
    pub tx_power_dbm: f64,
    pub power_offset_db: f64,
    pub target: CellIdentity,
    pub active_start_s: u64,
    pub active_end_s: u64,
}

/// Scenario file contents: area, propagation, optional adversary.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub propagation: PropagationParams,
    pub adversary: Option<AdversaryConfig>,
}

/// A generated report plus the per-measurement ground-truth mask of
/// adversary-originated entries. The mask is evaluation-only: it never
/// crosses the wire to the detection side.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledReport {
    pub report: MeasurementReport,
    pub rogue_mask: Vec<bool>,
}

impl LabeledReport {
    pub fn rogue_count(&self) -> u32 {
        self.rogue_mask.iter().filter(|&&r| r).count() as u32
    }
}

/// Any transmitter in the area — legitimate site or rogue.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmitter {
    pub cell: CellIdentity,
    pub x: f64,
    pub y: f64,
    pub tx_power_dbm: f64,
    pub rogue: bool,
}

pub fn validate_config(config: &ScenarioConfig) -> Result<(), SimError> {
    if config.cells.is_empty() {
        return Err(SimError::InvalidScenario("no cells configured".into()));
    }
    if config.duration_s < 1 {
        return Err(SimError::InvalidScenario("duration_s must be >= 1".into()));
    }
    if config.ml1_rate_hz < 1 || config.ml1_rate_hz > 1000 {
        return Err(SimError::InvalidScenario(
            "ml1_rate_hz must be in 1..=1000".into(),
        ));
    }
    let mut seen = std::collections::BTreeSet::new();
    for site in &config.cells {
        if !seen.insert(site.cell) {
            return Err(SimError::InvalidScenario(format!(
                "duplicate cell identity {}",
                site.cell
            )));
        }
    }
    for ue in &config.ues {
        if ue.waypoints.is_empty() {
            return Err(SimError::InvalidScenario(format!(
                "ue {} has no waypoints",
                ue.ue_id
            )));
        }
        if ue.speed_mps < 0.0 {
            return Err(SimError::InvalidScenario(format!(
                "ue {} has negative speed",
                ue.ue_id
            )));
        }
    }
    Ok(())
}

pub fn validate_propagation(p: &PropagationParams) -> Result<(), SimError> {
    if !(1.5..=6.0).contains(&p.exponent) {
        return Err(SimError::InvalidScenario(format!(
            "path-loss exponent {} outside [1.5, 6]",
            p.exponent
        )));
    }
    if p.shadowing_sigma_db < 0.0 {
        return Err(SimError::InvalidScenario(
            "shadowing_sigma_db must be >= 0".into(),
        ));
    }
    Ok(())
}

pub fn validate_adversary(
    adv: &AdversaryConfig,
    cells: &[CellSite],
) -> Result<(), SimError> {
    if adv.active_start_s >= adv.active_end_s {
        return Err(SimError::InvalidScenario(
            "adversary active window is empty".into(),
        ));
    }
    let exists = cells.iter().any(|c| c.cell == adv.target);
    match adv.mode {
        AdversaryMode::A2 if !exists => Err(SimError::A2TargetNotFound(adv.target)),
        AdversaryMode::A1 if exists => Err(SimError::A1IdentityCollision(adv.target)),
        _ => Ok(()),
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        validate_config(&self.config)?;
        validate_propagation(&self.propagation)?;
        if let Some(adv) = &self.adversary {
            validate_adversary(adv, &self.config.cells)?;
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Vec<LabeledReport>, SimError> {
        generate_stream(&self.config, &self.propagation, self.adversary.as_ref())
    }
}

/// Log-distance path loss; distances under the 1 m reference clamp to it.
pub fn path_loss(distance_m: f64, params: &PropagationParams, shadow_db: f64) -> f64 {
    let d = distance_m.max(1.0);
    params.pl0_db + 10.0 * params.exponent * d.log10() + shadow_db
}

fn dbm_to_linear(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Shadowing draw for one transmitter in one wall-clock second. Keyed —
/// not sequential — so the value does not depend on evaluation order,
/// and held constant within the second for temporal coherence. Rogue
/// transmitters shadow independently of the cells they impersonate.
pub fn shadow_draw(
    seed: u64,
    cell: &CellIdentity,
    rogue: bool,
    second: u64,
    sigma_db: f64,
) -> f64 {
    if sigma_db == 0.0 {
        return 0.0;
    }
    let mut h = splitmix64(seed ^ 0x5AD0_77D1_57A7_1C3E);
    h = splitmix64(h ^ cell.rat as u64);
    h = splitmix64(h ^ cell.arfcn as u64);
    h = splitmix64(h ^ cell.pci as u64);
    h = splitmix64(h ^ rogue as u64);
    h = splitmix64(h ^ second);
    let mut rng = ChaCha8Rng::seed_from_u64(h);
    let e: f64 = rng.sample(StandardNormal);
    sigma_db * e
}

/// Measures every detectable transmitter from one UE position.
///
/// `transmitters` carries a pre-drawn shadowing value per entry. RSRP
/// is tx power minus path loss; SINR subtracts co-channel interference
/// from everything else plus noise; RSRQ follows N·RSRP/RSSI with all
/// co-channel power in the RSSI. Sub-threshold transmitters still
/// interfere — they are dropped only from the output.
pub fn measure_cells(
    ue_pos: (f64, f64),
    transmitters: &[(Transmitter, f64)],
    params: &PropagationParams,
    timestamp_ms: u64,
) -> Vec<(CellMeasurement, bool)> {
    let noise_lin = dbm_to_linear(params.noise_floor_dbm);
    let rsrp: Vec<f64> = transmitters
        .iter()
        .map(|(t, shadow)| {
            let d = ((t.x - ue_pos.0).powi(2) + (t.y - ue_pos.1).powi(2)).sqrt();
            t.tx_power_dbm - path_loss(d, params, *shadow)
        })
        .collect();
    let mut out = Vec::new();
    for (i, (t, _)) in transmitters.iter().enumerate() {
        if rsrp[i] < DETECTION_THRESHOLD_DBM {
            continue;
        }
        let mut interference = noise_lin;
        let mut rssi = noise_lin;
        for (j, (u, _)) in transmitters.iter().enumerate() {
            if u.cell.rat == t.cell.rat && u.cell.arfcn == t.cell.arfcn {
                rssi += dbm_to_linear(rsrp[j]);
                if j != i {
                    interference += dbm_to_linear(rsrp[j]);
                }
            }
        }
        let p_lin = dbm_to_linear(rsrp[i]);
        let sinr = rsrp[i] - linear_to_db(interference);
        let rsrq = linear_to_db(RSRQ_N_RB * p_lin / rssi);
        out.push((
            CellMeasurement::new(t.cell, rsrp[i], rsrq, sinr, timestamp_ms),
            t.rogue,
        ));
    }
    out
}

/// Position along the UE's closed waypoint loop at elapsed time `t_s`.
pub fn position_at(ue: &UeConfig, t_s: f64) -> (f64, f64) {
    let pts = &ue.waypoints;
    if pts.len() == 1 || ue.speed_mps <= 0.0 {
        return pts[0];
    }
    let n = pts.len();
    let seg_len = |i: usize| {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt()
    };
    let total: f64 = (0..n).map(seg_len).sum();
    if total == 0.0 {
        return pts[0];
    }
    let mut dist = (ue.speed_mps * t_s) % total;
    for i in 0..n {
        let len = seg_len(i);
        if dist <= len {
            if len == 0.0 {
                return pts[i];
            }
            let f = dist / len;
            let a = pts[i];
            let b = pts[(i + 1) % n];
            return (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
        }
        dist -= len;
    }
    pts[0]
}

struct UeState {
    serving: Option<CellIdentity>,
}

/// Strongest observed power per identity (an impersonated identity takes
/// the stronger of its two transmitters).
fn strength_of(ms: &[(CellMeasurement, bool)], cell: &CellIdentity) -> Option<f64> {
    ms.iter()
        .filter(|(m, _)| m.cell == *cell)
        .map(|(m, _)| m.rsrp)
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

fn best_identity(ms: &[(CellMeasurement, bool)]) -> Option<CellIdentity> {
    let mut best: Option<(CellIdentity, f64)> = None;
    for (m, _) in ms {
        let s = strength_of(ms, &m.cell).unwrap();
        match &best {
            Some((c, bs)) => {
                // Strict comparison plus identity order keeps ties stable.
                if s > *bs || (s == *bs && m.cell < *c) {
                    best = Some((m.cell, s));
                }
            }
            None => best = Some((m.cell, s)),
        }
    }
    best.map(|(c, _)| c)
}

/// Generates the full time-ordered labeled report stream for a scenario.
///
/// Per UE and sampling instant this emits one ML1 report with every
/// detectable transmitter, then an event report when a neighbor beats
/// the sticky serving cell by the hysteresis margin (or the serving
/// cell vanished), carrying the measurements of the old and new serving
/// identities. The stream is deterministic in (configs, seed).
pub fn generate_stream(
    config: &ScenarioConfig,
    propagation: &PropagationParams,
    adversary: Option<&AdversaryConfig>,
) -> Result<Vec<LabeledReport>, SimError> {
    validate_config(config)?;
    validate_propagation(propagation)?;
    if let Some(adv) = adversary {
        validate_adversary(adv, &config.cells)?;
    }
    let period_ms = 1000 / config.ml1_rate_hz as u64;
    let end_ms = config.duration_s * 1000;
    let mut states: Vec<UeState> = config.ues.iter().map(|_| UeState { serving: None }).collect();
    let mut out = Vec::new();

    let legit: Vec<Transmitter> = config
        .cells
        .iter()
        .map(|site| Transmitter {
            cell: site.cell,
            x: site.x,
            y: site.y,
            tx_power_dbm: site.tx_power_dbm,
            rogue: false,
        })
        .collect();
    let rogue_tx: Option<Transmitter> = adversary.map(|adv| {
        let tx_power_dbm = match adv.mode {
            AdversaryMode::A1 => adv.tx_power_dbm,
            AdversaryMode::A2 => {
                let target = config
                    .cells
                    .iter()
                    .find(|c| c.cell == adv.target)
                    .expect("validated above");
                target.tx_power_dbm + adv.power_offset_db
            }
        };
        Transmitter {
            cell: adv.target,
            x: adv.x,
            y: adv.y,
            tx_power_dbm,
            rogue: true,
        }
    });

    let mut t_ms = 0u64;
    while t_ms < end_ms {
        let second = t_ms / 1000;
        let rogue_active = adversary.is_some_and(|adv| {
            second >= adv.active_start_s && second < adv.active_end_s
        });
        let mut active: Vec<(Transmitter, f64)> = Vec::with_capacity(legit.len() + 1);
        for t in &legit {
            let shadow = shadow_draw(
                config.seed,
                &t.cell,
                false,
                second,
                propagation.shadowing_sigma_db,
            );
            active.push((t.clone(), shadow));
        }
        if rogue_active {
            let t = rogue_tx.clone().expect("adversary present");
            let shadow = shadow_draw(
                config.seed,
                &t.cell,
                true,
                second,
                propagation.shadowing_sigma_db,
            );
            active.push((t, shadow));
        }
        for (ue_idx, ue) in config.ues.iter().enumerate() {
            let pos = position_at(ue, t_ms as f64 / 1000.0);
            let ms = measure_cells(pos, &active, propagation, t_ms);
            if ms.is_empty() {
                states[ue_idx].serving = None;
                continue;
            }
            let state = &mut states[ue_idx];
            let current = state
                .serving
                .filter(|c| strength_of(&ms, c).is_some());
            let serving = match current {
                Some(c) => c,
                None => {
                    // Initial camp or coverage loss: adopt the best cell.
                    let best = best_identity(&ms).unwrap();
                    state.serving = Some(best);
                    best
                }
            };
            push_report(&mut out, ue, serving, &ms, ReportSource::Ml1, None)?;

            let serving_strength = strength_of(&ms, &serving).unwrap();
            let challenger = best_identity(&ms).unwrap();
            if challenger != serving {
                let challenger_strength = strength_of(&ms, &challenger).unwrap();
                if challenger_strength > serving_strength + config.hysteresis_db {
                    push_report(
                        &mut out,
                        ue,
                        challenger,
                        &ms,
                        ReportSource::Event,
                        Some((serving, challenger)),
                    )?;
                    state.serving = Some(challenger);
                }
            }
        }
        t_ms += period_ms;
    }
    Ok(out)
}

fn push_report(
    out: &mut Vec<LabeledReport>,
    ue: &UeConfig,
    serving: CellIdentity,
    ms: &[(CellMeasurement, bool)],
    source: ReportSource,
    event_pair: Option<(CellIdentity, CellIdentity)>,
) -> Result<(), SimError> {
    let keep = |cell: &CellIdentity| match &event_pair {
        Some((old, new)) => cell == old || cell == new,
        None => true,
    };
    let mut neighbors = Vec::new();
    let mut mask = Vec::new();
    for (m, rogue) in ms {
        if keep(&m.cell) {
            neighbors.push(*m);
            mask.push(*rogue);
        }
    }
    if neighbors.is_empty() {
        return Ok(());
    }
    let report = MeasurementReport::new(ue.ue_id.clone(), false, serving, neighbors, source)?;
    out.push(LabeledReport {
        report,
        rogue_mask: mask,
    });
    Ok(())
}

/// Splits a stream at `floor(duration · fraction)` seconds and removes
/// every measurement of `holdout_cell` from the training part; the
/// inference part keeps the cell so it reappears as an unknown identity.
pub fn holdout_split(
    stream: &[LabeledReport],
    holdout_cell: CellIdentity,
    fraction: f64,
) -> Result<(Vec<LabeledReport>, Vec<LabeledReport>), SimError> {
    let appears = stream.iter().any(|r| {
        r.report.neighbors.iter().any(|m| m.cell == holdout_cell)
    });
    if !appears {
        return Err(SimError::HoldoutCellAbsent(holdout_cell));
    }
    let duration = stream
        .iter()
        .map(|r| r.report.first_timestamp_ms() / 1000 + 1)
        .max()
        .unwrap_or(0);
    let boundary_s = (duration as f64 * fraction).floor() as u64;
    let mut train = Vec::new();
    let mut infer = Vec::new();
    for r in stream {
        if r.report.first_timestamp_ms() / 1000 < boundary_s {
            let mut neighbors = Vec::new();
            let mut mask = Vec::new();
            for (m, &rogue) in r.report.neighbors.iter().zip(&r.rogue_mask) {
                if m.cell != holdout_cell {
                    neighbors.push(*m);
                    mask.push(rogue);
                }
            }
            if neighbors.is_empty() {
                continue;
            }
            let report = MeasurementReport::new(
                r.report.ue_id.clone(),
                r.report.concealed,
                r.report.serving,
                neighbors,
                r.report.source,
            )?;
            train.push(LabeledReport {
                report,
                rogue_mask: mask,
            });
        } else {
            infer.push(r.clone());
        }
    }
    Ok((train, infer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Rat;

    fn cell(arfcn: u32, pci: u16) -> CellIdentity {
        CellIdentity::new(Rat::Nr, arfcn, pci).unwrap()
    }

    fn flat_params() -> PropagationParams {
        PropagationParams {
            pl0_db: 40.0,
            exponent: 3.0,
            shadowing_sigma_db: 0.0,
            noise_floor_dbm: -104.0,
        }
    }

    fn site(c: CellIdentity, x: f64, y: f64, tx: f64) -> CellSite {
        CellSite {
            cell: c,
            x,
            y,
            tx_power_dbm: tx,
        }
    }

    fn tx(c: CellIdentity, x: f64, y: f64, p: f64) -> (Transmitter, f64) {
        (
            Transmitter {
                cell: c,
                x,
                y,
                tx_power_dbm: p,
                rogue: false,
            },
            0.0,
        )
    }

    fn simple_config(cells: Vec<CellSite>, duration_s: u64) -> ScenarioConfig {
        ScenarioConfig {
            cells,
            ues: vec![UeConfig {
                ue_id: "001010000000001".into(),
                waypoints: vec![(50.0, 0.0)],
                speed_mps: 0.0,
            }],
            duration_s,
            ml1_rate_hz: 5,
            hysteresis_db: 3.0,
            seed: 7,
        }
    }

    #[test]
    fn path_loss_reference_values() {
        let p = PropagationParams {
            pl0_db: 40.0,
            exponent: 3.0,
            shadowing_sigma_db: 0.0,
            noise_floor_dbm: -104.0,
        };
        assert_eq!(path_loss(1.0, &p, 0.0), 40.0);
        assert!((path_loss(10.0, &p, 0.0) - 70.0).abs() < 1e-12);
        let p2 = PropagationParams {
            exponent: 2.0,
            ..p
        };
        assert!((path_loss(100.0, &p2, 0.0) - 80.0).abs() < 1e-12);
        // Sub-reference distances clamp to 1 m.
        assert_eq!(path_loss(0.0, &p, 0.0), 40.0);
    }

    #[test]
    fn interference_free_sinr_equals_snr() {
        let p = flat_params();
        // Place the cell so rsrp lands exactly 30 dB above the noise floor:
        // tx 40, pl0 40 at 1 m -> rsrp 0... choose tx so rsrp = -74.
        let c = cell(100, 1);
        let ms = measure_cells((1.0, 0.0), &[tx(c, 0.0, 0.0, -34.0)], &p, 0);
        assert_eq!(ms.len(), 1);
        let m = ms[0].0;
        assert!((m.rsrp - -74.0).abs() < 1e-9);
        assert!((m.sinr - 30.0).abs() < 1e-9);
    }

    #[test]
    fn equal_cochannel_cells_sit_near_zero_sinr() {
        let p = flat_params();
        let a = cell(100, 1);
        let b = cell(100, 2);
        let ms = measure_cells(
            (0.0, 0.0),
            &[tx(a, 10.0, 0.0, 20.0), tx(b, -10.0, 0.0, 20.0)],
            &p,
            0,
        );
        assert_eq!(ms.len(), 2);
        for (m, _) in &ms {
            assert!(m.sinr.abs() < 0.05, "sinr {}", m.sinr);
        }
    }

    #[test]
    fn subthreshold_cells_omitted_but_interfere() {
        let p = flat_params();
        let near = cell(100, 1);
        let far = cell(100, 2);
        // Far cell lands below -140 dBm but still co-channel.
        let with_far = measure_cells(
            (1.0, 0.0),
            &[tx(near, 0.0, 0.0, -30.0), tx(far, 90_000.0, 0.0, 0.0)],
            &p,
            0,
        );
        assert_eq!(with_far.len(), 1);
        let without = measure_cells((1.0, 0.0), &[tx(near, 0.0, 0.0, -30.0)], &p, 0);
        assert!(with_far[0].0.sinr < without[0].0.sinr);
    }

    #[test]
    fn rsrp_monotone_in_distance_without_shadowing() {
        let p = flat_params();
        let c = cell(100, 1);
        // tx −25 dBm keeps every sample inside the clamp range
        // (−65 at 1 m down to ≈ −139.3 at 300 m).
        let mut last = f64::INFINITY;
        for d in [1.0, 5.0, 20.0, 80.0, 300.0] {
            let ms = measure_cells((d, 0.0), &[tx(c, 0.0, 0.0, -25.0)], &p, 0);
            let r = ms[0].0.rsrp;
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn strongest_cochannel_cell_has_best_sinr() {
        let p = flat_params();
        let cells: Vec<(Transmitter, f64)> = (0..4)
            .map(|i| tx(cell(100, i as u16 + 1), 30.0 * i as f64, 40.0, 25.0 + 3.0 * i as f64))
            .collect();
        let ms = measure_cells((35.0, 0.0), &cells, &p, 0);
        let best_rsrp = ms
            .iter()
            .max_by(|a, b| a.0.rsrp.total_cmp(&b.0.rsrp))
            .unwrap();
        let best_sinr = ms
            .iter()
            .max_by(|a, b| a.0.sinr.total_cmp(&b.0.sinr))
            .unwrap();
        assert_eq!(best_rsrp.0.cell, best_sinr.0.cell);
    }

    #[test]
    fn ml1_report_cadence_matches_rate() {
        let config = simple_config(vec![site(cell(100, 1), 0.0, 0.0, 43.0)], 10);
        let stream = generate_stream(&config, &flat_params(), None).unwrap();
        let ml1: Vec<_> = stream
            .iter()
            .filter(|r| r.report.source == ReportSource::Ml1)
            .collect();
        assert_eq!(ml1.len(), 50);
    }

    #[test]
    fn stream_is_deterministic() {
        let mut config = simple_config(
            vec![
                site(cell(100, 1), 0.0, 0.0, 43.0),
                site(cell(100, 2), 400.0, 0.0, 43.0),
            ],
            5,
        );
        config.ues[0].waypoints = vec![(0.0, 10.0), (400.0, 10.0)];
        config.ues[0].speed_mps = 30.0;
        let p = PropagationParams::default();
        let a = generate_stream(&config, &p, None).unwrap();
        let b = generate_stream(&config, &p, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn a1_rogue_appears_as_unknown_identity() {
        let config = simple_config(vec![site(cell(100, 1), 0.0, 0.0, 43.0)], 4);
        let adv = AdversaryConfig {
            mode: AdversaryMode::A1,
            x: 60.0,
            y: 0.0,
            tx_power_dbm: 30.0,
            power_offset_db: 0.0,
            target: cell(100, 999),
            active_start_s: 2,
            active_end_s: 4,
        };
        let stream = generate_stream(&config, &flat_params(), Some(&adv)).unwrap();
        let rogue_reports: Vec<_> = stream.iter().filter(|r| r.rogue_count() > 0).collect();
        assert!(!rogue_reports.is_empty());
        for r in &rogue_reports {
            assert!(r.report.first_timestamp_ms() / 1000 >= 2);
            for (m, &is_rogue) in r.report.neighbors.iter().zip(&r.rogue_mask) {
                if is_rogue {
                    assert_eq!(m.cell, cell(100, 999));
                }
            }
        }
        // Before the window the identity must be absent.
        for r in stream.iter().filter(|r| r.report.first_timestamp_ms() < 2000) {
            assert!(r.report.neighbors.iter().all(|m| m.cell != cell(100, 999)));
        }
    }

    #[test]
    fn a2_rogue_doubles_the_target_identity() {
        let target = cell(100, 1);
        let config = simple_config(vec![site(target, 0.0, 0.0, 43.0)], 2);
        let adv = AdversaryConfig {
            mode: AdversaryMode::A2,
            x: 55.0,
            y: 0.0,
            tx_power_dbm: 0.0,
            power_offset_db: 6.0,
            target,
            active_start_s: 0,
            active_end_s: 2,
        };
        let stream = generate_stream(&config, &flat_params(), Some(&adv)).unwrap();
        let ml1: Vec<_> = stream
            .iter()
            .filter(|r| r.report.source == ReportSource::Ml1)
            .collect();
        assert!(!ml1.is_empty());
        for r in &ml1 {
            let n = r
                .report
                .neighbors
                .iter()
                .filter(|m| m.cell == target)
                .count();
            assert_eq!(n, 2, "legit + rogue under one identity");
            assert_eq!(r.rogue_count(), 1);
        }
    }

    #[test]
    fn a2_colocated_zero_offset_is_statistically_invisible() {
        let target = cell(100, 1);
        let config = ScenarioConfig {
            seed: 11,
            ..simple_config(vec![site(target, 0.0, 0.0, 43.0)], 300)
        };
        let adv = AdversaryConfig {
            mode: AdversaryMode::A2,
            x: 0.0,
            y: 0.0,
            tx_power_dbm: 0.0,
            power_offset_db: 0.0,
            target,
            active_start_s: 0,
            active_end_s: 300,
        };
        let p = PropagationParams::default();
        let stream = generate_stream(&config, &p, Some(&adv)).unwrap();
        let (mut rogue_sum, mut rogue_n) = (0.0, 0);
        let (mut legit_sum, mut legit_n) = (0.0, 0);
        for r in &stream {
            for (m, &is_rogue) in r.report.neighbors.iter().zip(&r.rogue_mask) {
                if is_rogue {
                    rogue_sum += m.rsrp;
                    rogue_n += 1;
                } else {
                    legit_sum += m.rsrp;
                    legit_n += 1;
                }
            }
        }
        let diff = (rogue_sum / rogue_n as f64 - legit_sum / legit_n as f64).abs();
        assert!(diff < 0.8, "mean rsrp gap {diff} dB");
    }

    #[test]
    fn adversary_config_validation() {
        let legit = cell(100, 1);
        let cells = vec![site(legit, 0.0, 0.0, 43.0)];
        let mut adv = AdversaryConfig {
            mode: AdversaryMode::A2,
            x: 0.0,
            y: 0.0,
            tx_power_dbm: 30.0,
            power_offset_db: 6.0,
            target: cell(100, 2),
            active_start_s: 0,
            active_end_s: 1,
        };
        assert!(matches!(
            validate_adversary(&adv, &cells),
            Err(SimError::A2TargetNotFound(_))
        ));
        adv.mode = AdversaryMode::A1;
        adv.target = legit;
        assert!(matches!(
            validate_adversary(&adv, &cells),
            Err(SimError::A1IdentityCollision(_))
        ));
    }

    #[test]
    fn event_reports_fire_on_hysteresis_crossing() {
        let a = cell(100, 1);
        let b = cell(100, 2);
        let mut config = simple_config(
            vec![site(a, 0.0, 0.0, 43.0), site(b, 500.0, 0.0, 43.0)],
            20,
        );
        config.ues[0].waypoints = vec![(10.0, 5.0), (490.0, 5.0)];
        config.ues[0].speed_mps = 40.0;
        let stream = generate_stream(&config, &flat_params(), None).unwrap();
        let events: Vec<_> = stream
            .iter()
            .filter(|r| r.report.source == ReportSource::Event)
            .collect();
        assert!(!events.is_empty(), "crossing the area must hand over");
        for e in &events {
            let ids: std::collections::BTreeSet<_> =
                e.report.neighbors.iter().map(|m| m.cell).collect();
            assert!(ids.len() <= 2);
        }
    }

    #[test]
    fn holdout_split_boundary_and_removal() {
        let a = cell(100, 1);
        let b = cell(100, 2);
        let config = simple_config(
            vec![site(a, 0.0, 0.0, 43.0), site(b, 120.0, 0.0, 43.0)],
            10,
        );
        let stream = generate_stream(&config, &flat_params(), None).unwrap();
        let (train, infer) = holdout_split(&stream, b, 0.8).unwrap();
        assert!(train
            .iter()
            .all(|r| r.report.first_timestamp_ms() / 1000 < 8));
        assert!(infer
            .iter()
            .all(|r| r.report.first_timestamp_ms() / 1000 >= 8));
        assert!(train
            .iter()
            .all(|r| r.report.neighbors.iter().all(|m| m.cell != b)));
        assert!(infer
            .iter()
            .any(|r| r.report.neighbors.iter().any(|m| m.cell == b)));
        // Masks stay aligned after filtering.
        for r in train.iter().chain(&infer) {
            assert_eq!(r.report.neighbors.len(), r.rogue_mask.len());
        }
    }

    #[test]
    fn holdout_absent_cell_errors() {
        let a = cell(100, 1);
        let config = simple_config(vec![site(a, 0.0, 0.0, 43.0)], 3);
        let stream = generate_stream(&config, &flat_params(), None).unwrap();
        assert!(matches!(
            holdout_split(&stream, cell(100, 9), 0.8),
            Err(SimError::HoldoutCellAbsent(_))
        ));
    }

    #[test]
    fn trajectory_interpolates_and_cycles() {
        let ue = UeConfig {
            ue_id: "001010000000001".into(),
            waypoints: vec![(0.0, 0.0), (10.0, 0.0)],
            speed_mps: 1.0,
        };
        assert_eq!(position_at(&ue, 0.0), (0.0, 0.0));
        assert_eq!(position_at(&ue, 5.0), (5.0, 0.0));
        assert_eq!(position_at(&ue, 10.0), (10.0, 0.0));
        // Closed loop: the return leg heads back to the first waypoint.
        assert_eq!(position_at(&ue, 15.0), (5.0, 0.0));
        assert_eq!(position_at(&ue, 20.0), (0.0, 0.0));
    }
}
