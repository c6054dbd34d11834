//! Moving frames between the node and the engine: a TCP client that
//! performs the setup/subscription handshake and scores indications as
//! they arrive, the matching server loop that pumps a report stream to
//! one subscriber at a time, and the in-process driver used when both
//! ends live in a single binary.
//!
//! Shutdown vs loss: a clean end-of-stream at a frame boundary means
//! the node finished its stream and the client exits normally. An I/O
//! error or EOF inside a frame is a transport loss — the client
//! reconnects with the next subscription id (the node burns used ids)
//! while keeping the engine's buffers and snapshot intact. Consecutive
//! failures are bounded by an attempt budget.

use std::io::{BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::thread::sleep;
use std::time::Duration;

use crate::codec::{read_message, write_message, WireMessage};
use crate::e2node::E2Node;
use crate::types::MeasurementReport;

use super::{Decision, Engine, RetrainOutcome, Verdict, XappError};

pub const RETRY_BACKOFF: Duration = Duration::from_millis(100);
pub const DEFAULT_MAX_ATTEMPTS: u32 = 5;

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct RunStats {
    pub verdicts: u64,
    pub anomalies: u64,
    pub reconnects: u32,
    pub retrain_failures: u64,
}

fn note_verdict(stats: &mut RunStats, verdict: &Verdict) {
    stats.verdicts += 1;
    if verdict.decision == Decision::Anomaly {
        stats.anomalies += 1;
    }
}

fn note_retrain(stats: &mut RunStats, outcome: RetrainOutcome) {
    if let RetrainOutcome::Failed(reason) = outcome {
        stats.retrain_failures += 1;
        eprintln!("retrain failed, keeping previous model: {reason}");
    }
}

/// Drives an engine over an in-process node: reports go through the
/// same accumulation, quantization, and framing as the socket path, so
/// single-binary runs and distributed runs see bit-identical telemetry.
pub fn drive_reports<'a, I, F>(
    reports: I,
    engine: &mut Engine,
    mut on_verdict: F,
) -> Result<RunStats, XappError>
where
    I: IntoIterator<Item = &'a MeasurementReport>,
    F: FnMut(&Verdict),
{
    let mut node = E2Node::new();
    node.handle_setup(0);
    node.handle_subscription(1, 1000);
    engine.expect_subscription(1);
    let mut stats = RunStats::default();
    let mut consume = |engine: &mut Engine,
                       stats: &mut RunStats,
                       ind: WireMessage|
     -> Result<(), XappError> {
        if let Some(v) = engine.on_indication(&ind)? {
            note_verdict(stats, &v);
            on_verdict(&v);
        }
        note_retrain(stats, engine.maybe_retrain());
        Ok(())
    };
    for report in reports {
        for ind in node.on_report(report)? {
            consume(engine, &mut stats, ind)?;
        }
    }
    for ind in node.flush_all() {
        consume(engine, &mut stats, ind)?;
    }
    Ok(stats)
}

/// Connects to a node, subscribes, and scores until the stream ends.
/// Verdict lines go to `sink` as they are emitted.
pub fn run_xapp<W: Write>(
    addr: &str,
    engine: &mut Engine,
    sink: &mut W,
    node_id: u32,
    max_attempts: u32,
) -> Result<RunStats, XappError> {
    let mut stats = RunStats::default();
    let mut subscription_id: u32 = 1;
    let mut consecutive_failures: u32 = 0;
    let mut ever_connected = false;

    loop {
        let stream = match TcpStream::connect(addr) {
            Ok(s) => s,
            Err(e) => {
                consecutive_failures += 1;
                if consecutive_failures >= max_attempts {
                    return Err(XappError::RetriesExhausted {
                        attempts: consecutive_failures,
                        last: e.to_string(),
                    });
                }
                sleep(RETRY_BACKOFF);
                continue;
            }
        };
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);

        match handshake(&mut reader, &mut writer, node_id, subscription_id) {
            Ok(()) => {}
            Err(HandshakeFailure::Refused(reason)) => {
                // The node speaks the protocol but turned us down; a
                // burned subscription id is the benign cause, so try
                // the next id within the same budget.
                consecutive_failures += 1;
                subscription_id += 1;
                if consecutive_failures >= max_attempts {
                    return Err(XappError::Rejected(reason));
                }
                continue;
            }
            Err(HandshakeFailure::Broken(e)) => {
                consecutive_failures += 1;
                subscription_id += 1;
                if consecutive_failures >= max_attempts {
                    return Err(XappError::RetriesExhausted {
                        attempts: consecutive_failures,
                        last: e.to_string(),
                    });
                }
                sleep(RETRY_BACKOFF);
                continue;
            }
        }
        engine.expect_subscription(subscription_id);
        if ever_connected {
            stats.reconnects += 1;
        }
        ever_connected = true;
        consecutive_failures = 0;

        loop {
            match read_message(&mut reader) {
                Ok(None) => return Ok(stats), // orderly end of stream
                Ok(Some(msg)) => {
                    if let Some(v) = engine.on_indication(&msg)? {
                        writeln!(sink, "{}", v.to_line())?;
                        note_verdict(&mut stats, &v);
                    }
                    note_retrain(&mut stats, engine.maybe_retrain());
                }
                Err(e) => {
                    // Mid-stream loss: reconnect with a fresh id.
                    consecutive_failures += 1;
                    subscription_id += 1;
                    if consecutive_failures >= max_attempts {
                        return Err(XappError::RetriesExhausted {
                            attempts: consecutive_failures,
                            last: e.to_string(),
                        });
                    }
                    sleep(RETRY_BACKOFF);
                    break;
                }
            }
        }
    }
}

enum HandshakeFailure {
    /// The node answered but did not accept.
    Refused(String),
    /// The link failed before a usable answer.
    Broken(XappError),
}

fn handshake<R: std::io::Read, W: Write>(
    reader: &mut R,
    writer: &mut W,
    node_id: u32,
    subscription_id: u32,
) -> Result<(), HandshakeFailure> {
    let io = |e: XappError| HandshakeFailure::Broken(e);
    write_message(
        writer,
        &WireMessage::SetupRequest {
            node_id,
            capabilities: vec!["kpm-ext".into()],
        },
    )
    .map_err(|e| io(e.into()))?;
    writer.flush().map_err(|e| io(e.into()))?;
    match read_message(reader).map_err(|e| io(e.into()))? {
        Some(WireMessage::SetupResponse { accepted: true }) => {}
        Some(WireMessage::SetupResponse { accepted: false }) => {
            return Err(HandshakeFailure::Refused("setup rejected".into()))
        }
        other => {
            return Err(HandshakeFailure::Refused(format!(
                "expected setup response, got {other:?}"
            )))
        }
    }
    write_message(
        writer,
        &WireMessage::SubscriptionRequest {
            subscription_id,
            report_period_ms: 1000,
        },
    )
    .map_err(|e| io(e.into()))?;
    writer.flush().map_err(|e| io(e.into()))?;
    match read_message(reader).map_err(|e| io(e.into()))? {
        Some(WireMessage::SubscriptionResponse { accepted: true, .. }) => Ok(()),
        Some(WireMessage::SubscriptionResponse { accepted: false, .. }) => Err(
            HandshakeFailure::Refused(format!("subscription {subscription_id} rejected")),
        ),
        other => Err(HandshakeFailure::Refused(format!(
            "expected subscription response, got {other:?}"
        ))),
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct ServeStats {
    pub connections: u32,
    pub indications: u64,
    pub late_arrivals: u64,
}

/// Serves one report stream to subscribers, one connection at a time.
///
/// The node survives reconnects: a client that loses the link mid-run
/// resubscribes with a fresh id and the pump resumes where it stopped.
/// Indications framed but not yet delivered when a link drops are lost
/// with it, like any in-flight traffic. Returns once the stream and
/// final drain are fully delivered, or after `max_connections` links.
pub fn serve_stream(
    listener: &TcpListener,
    reports: &[MeasurementReport],
    max_connections: u32,
) -> Result<ServeStats, XappError> {
    let mut node = E2Node::new();
    let mut stats = ServeStats::default();
    let mut next = 0usize; // first report not yet consumed by the node
    let mut drained = false;

    while stats.connections < max_connections {
        let (stream, _) = listener.accept().map_err(XappError::Io)?;
        stats.connections += 1;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);

        // Handshake: answer frames until a subscription is accepted or
        // the link dies (then wait for the next connection).
        let subscribed = loop {
            match read_message(&mut reader) {
                Ok(Some(WireMessage::SetupRequest { node_id, .. })) => {
                    let resp = node.handle_setup(node_id);
                    if write_message(&mut writer, &resp).is_err() || writer.flush().is_err() {
                        break false;
                    }
                }
                Ok(Some(WireMessage::SubscriptionRequest {
                    subscription_id,
                    report_period_ms,
                })) => {
                    let resp = node.handle_subscription(subscription_id, report_period_ms);
                    let accepted = matches!(
                        resp,
                        WireMessage::SubscriptionResponse { accepted: true, .. }
                    );
                    if write_message(&mut writer, &resp).is_err() || writer.flush().is_err() {
                        break false;
                    }
                    if accepted {
                        break true;
                    }
                }
                Ok(Some(_)) | Ok(None) | Err(_) => break false,
            }
        };
        if !subscribed {
            continue;
        }

        let mut link_ok = true;
        while next < reports.len() && link_ok {
            let indications = node.on_report(&reports[next])?;
            next += 1;
            for ind in indications {
                if write_message(&mut writer, &ind).is_err() {
                    link_ok = false;
                    break;
                }
                stats.indications += 1;
            }
            if link_ok && writer.flush().is_err() {
                link_ok = false;
            }
        }
        if link_ok && next == reports.len() {
            for ind in node.flush_all() {
                if write_message(&mut writer, &ind).is_err() {
                    link_ok = false;
                    break;
                }
                stats.indications += 1;
            }
            if link_ok && writer.flush().is_ok() {
                drained = true;
            }
        }
        if drained {
            stats.late_arrivals = node.late_arrivals();
            return Ok(stats);
        }
    }
    stats.late_arrivals = node.late_arrivals();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelKind, TrainConfig};
    use crate::types::{CellIdentity, CellMeasurement, Rat, ReportSource};
    use crate::xapp::EngineConfig;
    use std::thread;

    fn cell(pci: u16) -> CellIdentity {
        CellIdentity::new(Rat::Nr, 620_000, pci).unwrap()
    }

    fn calm_reports(n_seconds: u64) -> Vec<MeasurementReport> {
        (0..n_seconds)
            .map(|s| {
                let m = CellMeasurement::new(cell(1), -90.0, -11.0, 12.0, s * 1000 + 100);
                MeasurementReport::new("ue-a".into(), true, cell(1), vec![m], ReportSource::Ml1)
                    .unwrap()
            })
            .collect()
    }

    fn fast_engine() -> Engine {
        Engine::bootstrap(EngineConfig {
            kind: ModelKind::IForest,
            train: TrainConfig {
                epochs: 2,
                ..TrainConfig::default()
            },
            ..EngineConfig::default()
        })
    }

    #[test]
    fn in_process_drive_scores_every_second() {
        let reports = calm_reports(25);
        let mut engine = fast_engine();
        let mut verdicts = Vec::new();
        let stats = drive_reports(reports.iter(), &mut engine, |v| verdicts.push(v.clone()))
            .unwrap();
        assert_eq!(stats.verdicts, 25);
        assert_eq!(verdicts.len(), 25);
        // Per-UE order preserved.
        let seconds: Vec<u64> = verdicts.iter().map(|v| v.second_index).collect();
        assert_eq!(seconds, (0..25).collect::<Vec<u64>>());
        // Warmup ends at the first retrain (10 buffered seconds).
        assert!(verdicts[..10].iter().all(|v| v.decision == Decision::Warmup));
        assert!(verdicts[10..].iter().all(|v| v.decision != Decision::Warmup));
    }

    #[test]
    fn socket_roundtrip_happy_path() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let reports = calm_reports(15);
        let server = thread::spawn(move || serve_stream(&listener, &reports, 3).unwrap());

        let mut engine = fast_engine();
        let mut sink = Vec::new();
        let stats = run_xapp(&addr, &mut engine, &mut sink, 42, 3).unwrap();
        let served = server.join().unwrap();

        assert_eq!(stats.reconnects, 0);
        assert_eq!(stats.verdicts, served.indications);
        assert_eq!(stats.verdicts, 15);
        let text = String::from_utf8(sink).unwrap();
        assert_eq!(text.lines().count(), 15);
        assert!(text.lines().next().unwrap().ends_with("WARMUP"));
    }

    #[test]
    fn client_reconnects_after_midframe_loss() {
        use crate::codec::encode;
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();

        let server = thread::spawn(move || {
            let mut node = E2Node::new();
            // First link: handshake, one indication, then die inside a
            // frame so the client sees a truncated read, not a clean
            // end. Scoped so both socket clones close and the FIN is
            // actually sent.
            {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut writer = BufWriter::new(stream);
                for _ in 0..2 {
                    match read_message(&mut reader).unwrap().unwrap() {
                        WireMessage::SetupRequest { node_id, .. } => {
                            write_message(&mut writer, &node.handle_setup(node_id)).unwrap();
                        }
                        WireMessage::SubscriptionRequest {
                            subscription_id,
                            report_period_ms,
                        } => {
                            let resp =
                                node.handle_subscription(subscription_id, report_period_ms);
                            write_message(&mut writer, &resp).unwrap();
                        }
                        other => panic!("unexpected {other:?}"),
                    }
                    writer.flush().unwrap();
                }
                let ind = WireMessage::RicIndication {
                    subscription_id: 1,
                    ue_id: "ue-a".into(),
                    second_index: 0,
                    measurements: Vec::new(),
                };
                write_message(&mut writer, &ind).unwrap();
                let half = &encode(&ind).unwrap()[..7];
                writer.write_all(half).unwrap();
                writer.flush().unwrap();
            }

            // Second link: fresh handshake must use a new id; then a
            // clean finish.
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut writer = BufWriter::new(stream);
            let mut seen_id = 0;
            for _ in 0..2 {
                match read_message(&mut reader).unwrap().unwrap() {
                    WireMessage::SetupRequest { node_id, .. } => {
                        write_message(&mut writer, &node.handle_setup(node_id)).unwrap();
                    }
                    WireMessage::SubscriptionRequest {
                        subscription_id,
                        report_period_ms,
                    } => {
                        seen_id = subscription_id;
                        let resp = node.handle_subscription(subscription_id, report_period_ms);
                        write_message(&mut writer, &resp).unwrap();
                    }
                    other => panic!("unexpected {other:?}"),
                }
                writer.flush().unwrap();
            }
            let ind = WireMessage::RicIndication {
                subscription_id: seen_id,
                ue_id: "ue-a".into(),
                second_index: 1,
                measurements: Vec::new(),
            };
            write_message(&mut writer, &ind).unwrap();
            writer.flush().unwrap();
            seen_id
        });

        let mut engine = fast_engine();
        let mut sink = Vec::new();
        let stats = run_xapp(&addr, &mut engine, &mut sink, 42, 5).unwrap();
        let second_id = server.join().unwrap();

        assert_eq!(stats.reconnects, 1);
        assert_eq!(second_id, 2, "reconnect must burn a fresh subscription id");
        assert_eq!(stats.verdicts, 2, "both seconds scored, buffers preserved");
        assert_eq!(engine.buffered_seconds(), 2);
    }

    #[test]
    fn client_gives_up_when_nobody_listens() {
        // Bind then drop to get a port that refuses connections.
        let addr = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().to_string()
        };
        let mut engine = fast_engine();
        let mut sink = Vec::new();
        let err = run_xapp(&addr, &mut engine, &mut sink, 42, 2).unwrap_err();
        assert!(matches!(err, XappError::RetriesExhausted { attempts: 2, .. }));
    }
}
