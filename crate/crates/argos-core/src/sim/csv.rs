//! Flat-file form of a labeled report stream.
//!
//! One row per cell measurement:
//! `ue_id,timestamp_ms,source,rat,arfcn,pci,rsrp,rsrq,sinr,is_rogue`.
//! Rows of one report are written contiguously with the serving cell's
//! measurements first, so a reader recovers report boundaries by grouping
//! consecutive rows with equal (ue_id, timestamp_ms, source) and takes the
//! first row's cell as serving. Exporting therefore normalizes measurement
//! order within a report; the multiset of measurements, the rogue labels,
//! and the serving cell are preserved exactly, and a second export of the
//! re-imported stream is byte-identical.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use crate::types::{CellIdentity, CellMeasurement, MeasurementReport, ReportSource};

use super::{LabeledReport, SimError};

pub const CSV_HEADER: &str = "ue_id,timestamp_ms,source,rat,arfcn,pci,rsrp,rsrq,sinr,is_rogue";

fn csv_err(line: usize, message: impl Into<String>) -> SimError {
    SimError::Csv {
        line,
        message: message.into(),
    }
}

pub fn write_csv<W: Write>(mut w: W, stream: &[LabeledReport]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for labeled in stream {
        let r = &labeled.report;
        // Serving rows first, original order otherwise.
        let mut order: Vec<usize> = (0..r.neighbors.len()).collect();
        order.sort_by_key(|&i| r.neighbors[i].cell != r.serving);
        for i in order {
            let m = &r.neighbors[i];
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.ue_id,
                m.timestamp_ms,
                r.source,
                m.cell.rat,
                m.cell.arfcn,
                m.cell.pci,
                m.rsrp,
                m.rsrq,
                m.sinr,
                u8::from(labeled.rogue_mask[i]),
            )?;
        }
    }
    Ok(())
}

struct Row {
    ue_id: String,
    timestamp_ms: u64,
    source: ReportSource,
    cell: CellIdentity,
    rsrp: f64,
    rsrq: f64,
    sinr: f64,
    rogue: bool,
}

fn parse_row(line: &str, line_no: usize, has_rogue: bool) -> Result<Row, SimError> {
    let fields: Vec<&str> = line.split(',').collect();
    let want = if has_rogue { 10 } else { 9 };
    if fields.len() != want {
        return Err(csv_err(
            line_no,
            format!("expected {want} fields, got {}", fields.len()),
        ));
    }
    fn num<T: std::str::FromStr>(s: &str, line_no: usize, what: &str) -> Result<T, SimError> {
        s.parse()
            .map_err(|_| csv_err(line_no, format!("bad {what} value {s:?}")))
    }
    let rat = fields[3]
        .parse()
        .map_err(|e| csv_err(line_no, format!("{e}")))?;
    let source = fields[2]
        .parse()
        .map_err(|e| csv_err(line_no, format!("{e}")))?;
    let cell = CellIdentity::new(
        rat,
        num(fields[4], line_no, "arfcn")?,
        num(fields[5], line_no, "pci")?,
    )
    .map_err(|e| csv_err(line_no, e.to_string()))?;
    let rogue = if has_rogue {
        match fields[9] {
            "0" => false,
            "1" => true,
            other => return Err(csv_err(line_no, format!("bad is_rogue value {other:?}"))),
        }
    } else {
        false
    };
    let row = Row {
        ue_id: fields[0].to_string(),
        timestamp_ms: num(fields[1], line_no, "timestamp_ms")?,
        source,
        cell,
        rsrp: num(fields[6], line_no, "rsrp")?,
        rsrq: num(fields[7], line_no, "rsrq")?,
        sinr: num(fields[8], line_no, "sinr")?,
        rogue,
    };
    for (what, v) in [("rsrp", row.rsrp), ("rsrq", row.rsrq), ("sinr", row.sinr)] {
        if !v.is_finite() {
            return Err(csv_err(line_no, format!("non-finite {what} value")));
        }
    }
    Ok(row)
}

fn is_imsi(ue_id: &str) -> bool {
    ue_id.len() == 15 && ue_id.bytes().all(|b| b.is_ascii_digit())
}

fn finish_group(rows: &[Row], line_no: usize) -> Result<LabeledReport, SimError> {
    let first = &rows[0];
    let neighbors: Vec<CellMeasurement> = rows
        .iter()
        .map(|r| CellMeasurement::new(r.cell, r.rsrp, r.rsrq, r.sinr, r.timestamp_ms))
        .collect();
    let rogue_mask: Vec<bool> = rows.iter().map(|r| r.rogue).collect();
    let report = MeasurementReport::new(
        first.ue_id.clone(),
        !is_imsi(&first.ue_id),
        first.cell,
        neighbors,
        first.source,
    )
    .map_err(|e| csv_err(line_no, e.to_string()))?;
    Ok(LabeledReport { report, rogue_mask })
}

fn read_rows<R: BufRead>(r: R, has_rogue: bool) -> Result<(Vec<LabeledReport>, usize), SimError> {
    let mut stream = Vec::new();
    let mut clamped = 0usize;
    let mut group: Vec<Row> = Vec::new();
    let mut group_line = 0usize;
    let mut finish = |group: &[Row], line: usize, clamped: &mut usize| -> Result<(), SimError> {
        let labeled = finish_group(group, line)?;
        // Count values the range clamp actually moved.
        for (raw, m) in group.iter().zip(&labeled.report.neighbors) {
            if raw.rsrp != m.rsrp || raw.rsrq != m.rsrq || raw.sinr != m.sinr {
                *clamped += 1;
            }
        }
        stream.push(labeled);
        Ok(())
    };
    // The caller consumed the header, so data starts at file line 2.
    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let row = parse_row(&line, line_no, has_rogue)?;
        let same_report = group.last().is_some_and(|prev| {
            prev.ue_id == row.ue_id
                && prev.timestamp_ms == row.timestamp_ms
                && prev.source == row.source
        });
        if !same_report && !group.is_empty() {
            finish(&group, group_line, &mut clamped)?;
            group.clear();
        }
        if group.is_empty() {
            group_line = line_no;
        }
        group.push(row);
    }
    if !group.is_empty() {
        finish(&group, group_line, &mut clamped)?;
    }
    Ok((stream, clamped))
}

fn read_header<R: BufRead>(r: &mut R) -> Result<String, SimError> {
    let mut header = String::new();
    if r.read_line(&mut header)? == 0 {
        return Err(csv_err(1, "empty file"));
    }
    Ok(header.trim_end().to_string())
}

pub fn read_csv<R: BufRead>(mut r: R) -> Result<Vec<LabeledReport>, SimError> {
    let header = read_header(&mut r)?;
    if header != CSV_HEADER {
        return Err(csv_err(1, format!("bad header {header:?}")));
    }
    Ok(read_rows(r, true)?.0)
}

/// Lenient reader for externally produced telemetry: the `is_rogue`
/// column may be absent (treated as all-legitimate), out-of-range
/// values are clamped and counted, and reports come back
/// timestamp-sorted. Malformed rows still fail with their line number.
pub fn ingest_csv<R: BufRead>(mut r: R) -> Result<(Vec<MeasurementReport>, usize), SimError> {
    let header = read_header(&mut r)?;
    let has_rogue = if header == CSV_HEADER {
        true
    } else if Some(header.as_str()) == CSV_HEADER.strip_suffix(",is_rogue") {
        false
    } else {
        return Err(csv_err(1, format!("bad header {header:?}")));
    };
    let (stream, clamped) = read_rows(r, has_rogue)?;
    let mut reports: Vec<MeasurementReport> =
        stream.into_iter().map(|labeled| labeled.report).collect();
    reports.sort_by_key(|r| r.first_timestamp_ms());
    Ok((reports, clamped))
}

pub fn save_csv(path: &Path, stream: &[LabeledReport]) -> Result<(), SimError> {
    let mut buf = Vec::new();
    write_csv(&mut buf, stream)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_csv(path: &Path) -> Result<Vec<LabeledReport>, SimError> {
    let file = fs::File::open(path)?;
    read_csv(io::BufReader::new(file))
}

pub fn ingest_csv_path(path: &Path) -> Result<(Vec<MeasurementReport>, usize), SimError> {
    let file = fs::File::open(path)?;
    ingest_csv(io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::super::Scenario;
    use super::*;
    use crate::sim::scenario::parse_scenario;

    fn two_cell_scenario() -> Scenario {
        parse_scenario(
            "\
duration_s = 12
seed = 4
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
x = 300
y = 0
tx_power_dbm = 43
[ue]
ue_id = 001010000000001
waypoints = 20,0 280,0
speed_mps = 25
[adversary]
mode = A2
rat = NR
arfcn = 620000
pci = 101
x = 10
y = 10
power_offset_db = 6
active_start_s = 6
",
        )
        .unwrap()
    }

    #[test]
    fn roundtrip_preserves_reports_and_labels() {
        let stream = two_cell_scenario().generate().unwrap();
        assert!(!stream.is_empty());
        let mut buf = Vec::new();
        write_csv(&mut buf, &stream).unwrap();
        let back = read_csv(io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(back.len(), stream.len());
        for (orig, re) in stream.iter().zip(&back) {
            assert_eq!(orig.report.ue_id, re.report.ue_id);
            assert_eq!(orig.report.source, re.report.source);
            assert_eq!(orig.report.serving, re.report.serving);
            assert_eq!(orig.report.concealed, re.report.concealed);
            assert_eq!(orig.rogue_count(), re.rogue_count());
            // Same multiset of (measurement, label) pairs.
            let key = |m: &CellMeasurement, rogue: bool| {
                (
                    m.cell,
                    m.timestamp_ms,
                    m.rsrp.to_bits(),
                    m.rsrq.to_bits(),
                    m.sinr.to_bits(),
                    rogue,
                )
            };
            let mut a: Vec<_> = orig
                .report
                .neighbors
                .iter()
                .zip(&orig.rogue_mask)
                .map(|(m, &r)| key(m, r))
                .collect();
            let mut b: Vec<_> = re
                .report
                .neighbors
                .iter()
                .zip(&re.rogue_mask)
                .map(|(m, &r)| key(m, r))
                .collect();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn second_export_is_byte_identical() {
        let stream = two_cell_scenario().generate().unwrap();
        let mut first = Vec::new();
        write_csv(&mut first, &stream).unwrap();
        let back = read_csv(io::BufReader::new(&first[..])).unwrap();
        let mut second = Vec::new();
        write_csv(&mut second, &back).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn serving_cell_rows_come_first() {
        let stream = two_cell_scenario().generate().unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &stream).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut reports = 0;
        let mut prev_key = None;
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            let key = (f[0].to_string(), f[1].to_string(), f[2].to_string());
            if prev_key.as_ref() != Some(&key) {
                // First row of a new report: must match that report's serving cell.
                let r = &stream[reports].report;
                assert_eq!(f[3], r.serving.rat.to_string());
                assert_eq!(f[4], r.serving.arfcn.to_string());
                assert_eq!(f[5], r.serving.pci.to_string());
                reports += 1;
                prev_key = Some(key);
            }
        }
        assert_eq!(reports, stream.len());
    }

    #[test]
    fn rejects_malformed_rows() {
        let bad_header = "who,what\n";
        assert!(read_csv(io::BufReader::new(bad_header.as_bytes())).is_err());
        let bad_field = format!("{CSV_HEADER}\nue1,0,ML1,NR,1,1,-90,-10,nope,0\n");
        match read_csv(io::BufReader::new(bad_field.as_bytes())) {
            Err(SimError::Csv { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected csv error, got {other:?}"),
        }
        let bad_flag = format!("{CSV_HEADER}\nue1,0,ML1,NR,1,1,-90,-10,3,2\n");
        assert!(read_csv(io::BufReader::new(bad_flag.as_bytes())).is_err());
        let non_finite = format!("{CSV_HEADER}\nue1,0,ML1,NR,1,1,nan,-10,3,0\n");
        match read_csv(io::BufReader::new(non_finite.as_bytes())) {
            Err(SimError::Csv { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("non-finite"));
            }
            other => panic!("expected csv error, got {other:?}"),
        }
    }

    #[test]
    fn ingest_accepts_missing_rogue_column_and_sorts() {
        // Two reports written newest-first, no is_rogue column.
        let text = "\
ue_id,timestamp_ms,source,rat,arfcn,pci,rsrp,rsrq,sinr
ue-b,2000,ML1,NR,1,7,-90,-10,5
ue-a,1000,ML1,NR,1,7,-95,-11,4
";
        let (reports, clamped) = ingest_csv(io::BufReader::new(text.as_bytes())).unwrap();
        assert_eq!(clamped, 0);
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].ue_id, "ue-a");
        assert_eq!(reports[1].ue_id, "ue-b");
        assert!(reports[0].first_timestamp_ms() <= reports[1].first_timestamp_ms());
    }

    #[test]
    fn ingest_counts_clamped_values() {
        let text = format!("{CSV_HEADER}\nue1,0,ML1,NR,1,1,-200,-10,3,0\nue1,0,ML1,NR,1,2,-90,-10,3,0\n");
        let (reports, clamped) = ingest_csv(io::BufReader::new(text.as_bytes())).unwrap();
        assert_eq!(clamped, 1);
        assert_eq!(reports[0].neighbors[0].rsrp, -156.0);
    }

    #[test]
    fn ingest_roundtrips_generated_stream() {
        let stream = two_cell_scenario().generate().unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &stream).unwrap();
        let (reports, clamped) = ingest_csv(io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(clamped, 0);
        let originals: Vec<_> = read_csv(io::BufReader::new(&buf[..]))
            .unwrap()
            .into_iter()
            .map(|l| l.report)
            .collect();
        assert_eq!(reports, originals);
    }

    #[test]
    fn ingest_of_bare_header_is_empty() {
        let (reports, clamped) =
            ingest_csv(io::BufReader::new(format!("{CSV_HEADER}\n").as_bytes())).unwrap();
        assert!(reports.is_empty());
        assert_eq!(clamped, 0);
        assert!(ingest_csv(io::BufReader::new("".as_bytes())).is_err());
    }
}
