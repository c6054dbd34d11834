//! Declarative scenario files: top-level `key = value` pairs followed by
//! repeated `[propagation]` / `[cell]` / `[ue]` / `[adversary]` blocks.
//! `#` starts a comment. Unknown keys are errors, not warnings — a typo
//! in a scenario must not silently change an experiment.

use std::fmt::Write as _;

use crate::types::{CellIdentity, Rat};

use super::{
    AdversaryConfig, AdversaryMode, CellSite, PropagationParams, Scenario, ScenarioConfig,
    SimError, UeConfig,
};

fn err(line: usize, message: impl Into<String>) -> SimError {
    SimError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Default)]
struct CellBuilder {
    rat: Option<Rat>,
    arfcn: Option<u32>,
    pci: Option<u16>,
    x: Option<f64>,
    y: Option<f64>,
    tx_power_dbm: Option<f64>,
}

impl CellBuilder {
    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), SimError> {
        match key {
            "rat" => self.rat = Some(value.parse().map_err(|e| err(line, format!("{e}")))?),
            "arfcn" => self.arfcn = Some(parse_num(value, line, "arfcn")?),
            "pci" => self.pci = Some(parse_num(value, line, "pci")?),
            "x" => self.x = Some(parse_num(value, line, "x")?),
            "y" => self.y = Some(parse_num(value, line, "y")?),
            "tx_power_dbm" => self.tx_power_dbm = Some(parse_num(value, line, "tx_power_dbm")?),
            other => return Err(err(line, format!("unknown cell key {other:?}"))),
        }
        Ok(())
    }

    fn build(self, line: usize) -> Result<CellSite, SimError> {
        let cell = CellIdentity::new(
            self.rat.ok_or_else(|| err(line, "cell missing rat"))?,
            self.arfcn.ok_or_else(|| err(line, "cell missing arfcn"))?,
            self.pci.ok_or_else(|| err(line, "cell missing pci"))?,
        )
        .map_err(|e| err(line, e.to_string()))?;
        Ok(CellSite {
            cell,
            x: self.x.ok_or_else(|| err(line, "cell missing x"))?,
            y: self.y.ok_or_else(|| err(line, "cell missing y"))?,
            tx_power_dbm: self
                .tx_power_dbm
                .ok_or_else(|| err(line, "cell missing tx_power_dbm"))?,
        })
    }
}

#[derive(Default)]
struct UeBuilder {
    ue_id: Option<String>,
    waypoints: Option<Vec<(f64, f64)>>,
    speed_mps: Option<f64>,
}

impl UeBuilder {
    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), SimError> {
        match key {
            "ue_id" => self.ue_id = Some(value.to_string()),
            "speed_mps" => self.speed_mps = Some(parse_num(value, line, "speed_mps")?),
            "waypoints" => {
                let mut pts = Vec::new();
                for token in value.split_whitespace() {
                    let (x, y) = token
                        .split_once(',')
                        .ok_or_else(|| err(line, format!("waypoint {token:?} is not x,y")))?;
                    pts.push((
                        parse_num(x, line, "waypoint x")?,
                        parse_num(y, line, "waypoint y")?,
                    ));
                }
                self.waypoints = Some(pts);
            }
            other => return Err(err(line, format!("unknown ue key {other:?}"))),
        }
        Ok(())
    }

    fn build(self, line: usize) -> Result<UeConfig, SimError> {
        Ok(UeConfig {
            ue_id: self.ue_id.ok_or_else(|| err(line, "ue missing ue_id"))?,
            waypoints: self
                .waypoints
                .ok_or_else(|| err(line, "ue missing waypoints"))?,
            speed_mps: self.speed_mps.unwrap_or(0.0),
        })
    }
}

#[derive(Default)]
struct AdversaryBuilder {
    mode: Option<AdversaryMode>,
    rat: Option<Rat>,
    arfcn: Option<u32>,
    pci: Option<u16>,
    x: Option<f64>,
    y: Option<f64>,
    tx_power_dbm: Option<f64>,
    power_offset_db: Option<f64>,
    active_start_s: Option<u64>,
    active_end_s: Option<u64>,
}

impl AdversaryBuilder {
    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), SimError> {
        match key {
            "mode" => {
                self.mode = Some(match value {
                    "A1" => AdversaryMode::A1,
                    "A2" => AdversaryMode::A2,
                    other => return Err(err(line, format!("unknown adversary mode {other:?}"))),
                })
            }
            "rat" => self.rat = Some(value.parse().map_err(|e| err(line, format!("{e}")))?),
            "arfcn" => self.arfcn = Some(parse_num(value, line, "arfcn")?),
            "pci" => self.pci = Some(parse_num(value, line, "pci")?),
            "x" => self.x = Some(parse_num(value, line, "x")?),
            "y" => self.y = Some(parse_num(value, line, "y")?),
            "tx_power_dbm" => self.tx_power_dbm = Some(parse_num(value, line, "tx_power_dbm")?),
            "power_offset_db" => {
                self.power_offset_db = Some(parse_num(value, line, "power_offset_db")?)
            }
            "active_start_s" => {
                self.active_start_s = Some(parse_num(value, line, "active_start_s")?)
            }
            "active_end_s" => self.active_end_s = Some(parse_num(value, line, "active_end_s")?),
            other => return Err(err(line, format!("unknown adversary key {other:?}"))),
        }
        Ok(())
    }

    fn build(self, line: usize, duration_s: u64) -> Result<AdversaryConfig, SimError> {
        let mode = self.mode.ok_or_else(|| err(line, "adversary missing mode"))?;
        let target = CellIdentity::new(
            self.rat.ok_or_else(|| err(line, "adversary missing rat"))?,
            self.arfcn
                .ok_or_else(|| err(line, "adversary missing arfcn"))?,
            self.pci.ok_or_else(|| err(line, "adversary missing pci"))?,
        )
        .map_err(|e| err(line, e.to_string()))?;
        if mode == AdversaryMode::A1 && self.tx_power_dbm.is_none() {
            return Err(err(line, "A1 adversary missing tx_power_dbm"));
        }
        Ok(AdversaryConfig {
            mode,
            x: self.x.ok_or_else(|| err(line, "adversary missing x"))?,
            y: self.y.ok_or_else(|| err(line, "adversary missing y"))?,
            tx_power_dbm: self.tx_power_dbm.unwrap_or(0.0),
            power_offset_db: self.power_offset_db.unwrap_or(6.0),
            active_start_s: self.active_start_s.unwrap_or(0),
            active_end_s: self.active_end_s.unwrap_or(duration_s),
            target,
        })
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, line: usize, what: &str) -> Result<T, SimError> {
    value
        .parse()
        .map_err(|_| err(line, format!("bad {what} value {value:?}")))
}

enum Section {
    Top,
    Propagation,
    Cell(CellBuilder, usize),
    Ue(UeBuilder, usize),
    Adversary(AdversaryBuilder, usize),
}

/// Parses a scenario file and validates the result.
pub fn parse_scenario(text: &str) -> Result<Scenario, SimError> {
    let mut duration_s: Option<u64> = None;
    let mut ml1_rate_hz: u32 = 5;
    let mut hysteresis_db: f64 = 3.0;
    let mut seed: u64 = 0;
    let mut propagation = PropagationParams::default();
    let mut cells = Vec::new();
    let mut ues = Vec::new();
    let mut adversary_builder: Option<(AdversaryBuilder, usize)> = None;
    let mut section = Section::Top;

    let flush = |section: &mut Section,
                     cells: &mut Vec<CellSite>,
                     ues: &mut Vec<UeConfig>,
                     adversary_builder: &mut Option<(AdversaryBuilder, usize)>|
     -> Result<(), SimError> {
        match std::mem::replace(section, Section::Top) {
            Section::Cell(b, line) => cells.push(b.build(line)?),
            Section::Ue(b, line) => ues.push(b.build(line)?),
            Section::Adversary(b, line) => {
                if adversary_builder.is_some() {
                    return Err(err(line, "multiple adversary blocks"));
                }
                *adversary_builder = Some((b, line));
            }
            Section::Top | Section::Propagation => {}
        }
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, "unterminated section header"))?;
            flush(&mut section, &mut cells, &mut ues, &mut adversary_builder)?;
            section = match name {
                "propagation" => Section::Propagation,
                "cell" => Section::Cell(CellBuilder::default(), line_no),
                "ue" => Section::Ue(UeBuilder::default(), line_no),
                "adversary" => Section::Adversary(AdversaryBuilder::default(), line_no),
                other => return Err(err(line_no, format!("unknown section [{other}]"))),
            };
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected key = value, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        match &mut section {
            Section::Top => match key {
                "duration_s" => duration_s = Some(parse_num(value, line_no, "duration_s")?),
                "ml1_rate_hz" => ml1_rate_hz = parse_num(value, line_no, "ml1_rate_hz")?,
                "hysteresis_db" => hysteresis_db = parse_num(value, line_no, "hysteresis_db")?,
                "seed" => seed = parse_num(value, line_no, "seed")?,
                other => return Err(err(line_no, format!("unknown top-level key {other:?}"))),
            },
            Section::Propagation => match key {
                "pl0_db" => propagation.pl0_db = parse_num(value, line_no, "pl0_db")?,
                "exponent" => propagation.exponent = parse_num(value, line_no, "exponent")?,
                "shadowing_sigma_db" => {
                    propagation.shadowing_sigma_db =
                        parse_num(value, line_no, "shadowing_sigma_db")?
                }
                "noise_floor_dbm" => {
                    propagation.noise_floor_dbm = parse_num(value, line_no, "noise_floor_dbm")?
                }
                other => return Err(err(line_no, format!("unknown propagation key {other:?}"))),
            },
            Section::Cell(b, _) => b.set(key, value, line_no)?,
            Section::Ue(b, _) => b.set(key, value, line_no)?,
            Section::Adversary(b, _) => b.set(key, value, line_no)?,
        }
    }
    flush(&mut section, &mut cells, &mut ues, &mut adversary_builder)?;

    let duration_s = duration_s.ok_or_else(|| err(1, "missing top-level duration_s"))?;
    let adversary = adversary_builder
        .map(|(b, line)| b.build(line, duration_s))
        .transpose()?;
    let scenario = Scenario {
        config: ScenarioConfig {
            cells,
            ues,
            duration_s,
            ml1_rate_hz,
            hysteresis_db,
            seed,
        },
        propagation,
        adversary,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Renders a scenario back into the file format `parse_scenario` reads.
pub fn scenario_to_text(s: &Scenario) -> String {
    let mut out = String::new();
    let c = &s.config;
    let _ = writeln!(out, "duration_s = {}", c.duration_s);
    let _ = writeln!(out, "ml1_rate_hz = {}", c.ml1_rate_hz);
    let _ = writeln!(out, "hysteresis_db = {}", c.hysteresis_db);
    let _ = writeln!(out, "seed = {}", c.seed);
    let p = &s.propagation;
    let _ = writeln!(out, "\n[propagation]");
    let _ = writeln!(out, "pl0_db = {}", p.pl0_db);
    let _ = writeln!(out, "exponent = {}", p.exponent);
    let _ = writeln!(out, "shadowing_sigma_db = {}", p.shadowing_sigma_db);
    let _ = writeln!(out, "noise_floor_dbm = {}", p.noise_floor_dbm);
    for site in &c.cells {
        let _ = writeln!(out, "\n[cell]");
        let _ = writeln!(out, "rat = {}", site.cell.rat);
        let _ = writeln!(out, "arfcn = {}", site.cell.arfcn);
        let _ = writeln!(out, "pci = {}", site.cell.pci);
        let _ = writeln!(out, "x = {}", site.x);
        let _ = writeln!(out, "y = {}", site.y);
        let _ = writeln!(out, "tx_power_dbm = {}", site.tx_power_dbm);
    }
    for ue in &c.ues {
        let _ = writeln!(out, "\n[ue]");
        let _ = writeln!(out, "ue_id = {}", ue.ue_id);
        let waypoints: Vec<String> = ue
            .waypoints
            .iter()
            .map(|(x, y)| format!("{x},{y}"))
            .collect();
        let _ = writeln!(out, "waypoints = {}", waypoints.join(" "));
        let _ = writeln!(out, "speed_mps = {}", ue.speed_mps);
    }
    if let Some(a) = &s.adversary {
        let _ = writeln!(out, "\n[adversary]");
        let _ = writeln!(
            out,
            "mode = {}",
            match a.mode {
                AdversaryMode::A1 => "A1",
                AdversaryMode::A2 => "A2",
            }
        );
        let _ = writeln!(out, "rat = {}", a.target.rat);
        let _ = writeln!(out, "arfcn = {}", a.target.arfcn);
        let _ = writeln!(out, "pci = {}", a.target.pci);
        let _ = writeln!(out, "x = {}", a.x);
        let _ = writeln!(out, "y = {}", a.y);
        let _ = writeln!(out, "tx_power_dbm = {}", a.tx_power_dbm);
        let _ = writeln!(out, "power_offset_db = {}", a.power_offset_db);
        let _ = writeln!(out, "active_start_s = {}", a.active_start_s);
        let _ = writeln!(out, "active_end_s = {}", a.active_end_s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# two cells, one walker, late A1 rogue
duration_s = 60
ml1_rate_hz = 5
hysteresis_db = 3
seed = 9

[propagation]
pl0_db = 40
exponent = 3.2
shadowing_sigma_db = 1.5
noise_floor_dbm = -104

[cell]
rat = NR
arfcn = 620000
pci = 101
x = 0
y = 0
tx_power_dbm = 43

[cell]
rat = NR
arfcn = 620000
pci = 102
x = 350
y = 0
tx_power_dbm = 43

[ue]
ue_id = 001010000000001
waypoints = 10,5 340,5
speed_mps = 12

[adversary]
mode = A1
rat = NR
arfcn = 620000
pci = 300
x = 180
y = 40
tx_power_dbm = 30
active_start_s = 40
active_end_s = 60
";

    #[test]
    fn parses_full_scenario() {
        let s = parse_scenario(SAMPLE).unwrap();
        assert_eq!(s.config.cells.len(), 2);
        assert_eq!(s.config.ues.len(), 1);
        assert_eq!(s.config.duration_s, 60);
        assert_eq!(s.propagation.exponent, 3.2);
        let adv = s.adversary.as_ref().unwrap();
        assert_eq!(adv.mode, AdversaryMode::A1);
        assert_eq!(adv.active_start_s, 40);
        assert_eq!(adv.power_offset_db, 6.0); // default
        assert_eq!(s.config.ues[0].waypoints, vec![(10.0, 5.0), (340.0, 5.0)]);
    }

    #[test]
    fn roundtrips_through_text() {
        let s = parse_scenario(SAMPLE).unwrap();
        let text = scenario_to_text(&s);
        let back = parse_scenario(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn reports_line_numbers_on_errors() {
        let bad = "duration_s = 10\nnot a kv line\n";
        match parse_scenario(bad) {
            Err(SimError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_keys_and_sections() {
        assert!(parse_scenario("duration_s = 5\nfrobnicate = 1\n").is_err());
        assert!(parse_scenario("duration_s = 5\n[warp]\n").is_err());
    }

    #[test]
    fn requires_duration_and_complete_blocks() {
        assert!(parse_scenario("seed = 1\n").is_err());
        let missing_tx = "\
duration_s = 5
[cell]
rat = NR
arfcn = 1
pci = 1
x = 0
y = 0
[ue]
ue_id = 001010000000001
waypoints = 0,0
";
        match parse_scenario(missing_tx) {
            Err(SimError::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("tx_power_dbm"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn a2_validation_applies_after_parse() {
        let text = "\
duration_s = 5
[cell]
rat = NR
arfcn = 1
pci = 1
x = 0
y = 0
tx_power_dbm = 40
[ue]
ue_id = 001010000000001
waypoints = 0,0
[adversary]
mode = A2
rat = NR
arfcn = 1
pci = 7
x = 0
y = 0
";
        assert!(matches!(
            parse_scenario(text),
            Err(SimError::A2TargetNotFound(_))
        ));
    }
}
