//! CU-side node emulator: accepts a setup and one subscription at a
//! time, accumulates incoming measurement reports per UE, and emits one
//! indication per UE per completed second.
//!
//! Windowing: a UE's open second closes as soon as a measurement with a
//! later second index arrives; seconds skipped in between emit explicit
//! empty indications so downstream triggers stay time-driven (coverage
//! gaps become all-zero telemetry vectors, which are legitimate training
//! data). Measurements for already-closed seconds are dropped and
//! counted, never reordered — memory stays bounded and the sources are
//! near-in-order anyway.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::codec::{WireMeasurement, WireMessage};
use crate::types::MeasurementReport;

#[derive(Debug, Error)]
pub enum E2Error {
    #[error("no active subscription")]
    NoActiveSubscription,
}

#[derive(Debug, Default)]
struct UeState {
    /// Open second and its pending measurements, if any.
    open: Option<(u64, Vec<WireMeasurement>)>,
    /// Lowest second index that may still be emitted (last emitted + 1).
    next_second: u64,
    /// Whether anything was ever emitted (distinguishes next_second = 0).
    emitted_any: bool,
}

/// The node emulator. Single subscriber model: the most recently
/// accepted subscription tags outgoing indications; earlier ids stay
/// burned so a reconnecting subscriber must pick a fresh one.
#[derive(Debug, Default)]
pub struct E2Node {
    setup_node_id: Option<u32>,
    used_subscription_ids: Vec<u32>,
    active_subscription: Option<u32>,
    ues: BTreeMap<String, UeState>,
    late_arrivals: u64,
}

impl E2Node {
    pub fn new() -> Self {
        Self::default()
    }

    /// Always accepts; remembers the peer's node id.
    pub fn handle_setup(&mut self, node_id: u32) -> WireMessage {
        self.setup_node_id = Some(node_id);
        WireMessage::SetupResponse { accepted: true }
    }

    /// Accepts iff setup completed, the period is exactly 1000 ms, and
    /// the id was never used before.
    pub fn handle_subscription(
        &mut self,
        subscription_id: u32,
        report_period_ms: u32,
    ) -> WireMessage {
        let accepted = self.setup_node_id.is_some()
            && report_period_ms == 1000
            && !self.used_subscription_ids.contains(&subscription_id);
        if accepted {
            self.used_subscription_ids.push(subscription_id);
            self.active_subscription = Some(subscription_id);
        }
        WireMessage::SubscriptionResponse {
            subscription_id,
            accepted,
        }
    }

    pub fn late_arrivals(&self) -> u64 {
        self.late_arrivals
    }

    pub fn active_subscription(&self) -> Option<u32> {
        self.active_subscription
    }

    /// Feeds one report in; returns the indications it completed.
    ///
    /// Measurements are processed in timestamp order regardless of their
    /// order inside the report, so a report straddling a second boundary
    /// never marks its own earlier half late.
    pub fn on_report(
        &mut self,
        report: &MeasurementReport,
    ) -> Result<Vec<WireMessage>, E2Error> {
        let subscription_id = self
            .active_subscription
            .ok_or(E2Error::NoActiveSubscription)?;
        let mut order: Vec<usize> = (0..report.neighbors.len()).collect();
        order.sort_by_key(|&i| report.neighbors[i].timestamp_ms);
        let state = self.ues.entry(report.ue_id.clone()).or_default();
        let mut out = Vec::new();
        for i in order {
            let m = &report.neighbors[i];
            let second = m.timestamp_ms / 1000;
            match &mut state.open {
                Some((cur, pending)) => {
                    if second == *cur {
                        pending.push(WireMeasurement::from_measurement(m));
                    } else if second < *cur {
                        self.late_arrivals += 1;
                    } else {
                        let (closed, data) = (*cur, std::mem::take(pending));
                        out.push(indication(subscription_id, &report.ue_id, closed, data));
                        for gap in closed + 1..second {
                            out.push(indication(subscription_id, &report.ue_id, gap, Vec::new()));
                        }
                        state.open = Some((second, vec![WireMeasurement::from_measurement(m)]));
                        state.next_second = second;
                        state.emitted_any = true;
                    }
                }
                None => {
                    if state.emitted_any && second < state.next_second {
                        self.late_arrivals += 1;
                    } else {
                        state.open =
                            Some((second, vec![WireMeasurement::from_measurement(m)]));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Drains every open partial second. Idempotent; accumulators reset
    /// but the per-UE emission floor survives, so stale data arriving
    /// after a drain still counts as late.
    pub fn flush_all(&mut self) -> Vec<WireMessage> {
        let subscription_id = match self.active_subscription {
            Some(id) => id,
            None => return Vec::new(),
        };
        let mut out = Vec::new();
        for (ue_id, state) in self.ues.iter_mut() {
            if let Some((second, data)) = state.open.take() {
                out.push(indication(subscription_id, ue_id, second, data));
                state.next_second = second + 1;
                state.emitted_any = true;
            }
        }
        out
    }
}

fn indication(
    subscription_id: u32,
    ue_id: &str,
    second_index: u64,
    measurements: Vec<WireMeasurement>,
) -> WireMessage {
    WireMessage::RicIndication {
        subscription_id,
        ue_id: ue_id.to_string(),
        second_index,
        measurements,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{CellIdentity, CellMeasurement, Rat, ReportSource};

    fn cell(pci: u16) -> CellIdentity {
        CellIdentity::new(Rat::Nr, 620_000, pci).unwrap()
    }

    fn report(ue: &str, timestamps: &[u64]) -> MeasurementReport {
        let ms: Vec<CellMeasurement> = timestamps
            .iter()
            .map(|&t| CellMeasurement::new(cell(1), -90.0, -11.0, 12.0, t))
            .collect();
        MeasurementReport::new(ue.into(), true, cell(1), ms, ReportSource::Ml1).unwrap()
    }

    fn ready_node() -> E2Node {
        let mut node = E2Node::new();
        node.handle_setup(7);
        match node.handle_subscription(1, 1000) {
            WireMessage::SubscriptionResponse { accepted, .. } => assert!(accepted),
            other => panic!("unexpected {other:?}"),
        }
        node
    }

    fn seconds_of(messages: &[WireMessage]) -> Vec<u64> {
        messages
            .iter()
            .map(|m| match m {
                WireMessage::RicIndication { second_index, .. } => *second_index,
                other => panic!("unexpected {other:?}"),
            })
            .collect()
    }

    #[test]
    fn subscription_gate() {
        let mut node = E2Node::new();
        // Before setup: rejected.
        assert!(matches!(
            node.handle_subscription(1, 1000),
            WireMessage::SubscriptionResponse { accepted: false, .. }
        ));
        node.handle_setup(1);
        assert!(matches!(
            node.handle_subscription(1, 1000),
            WireMessage::SubscriptionResponse { accepted: true, .. }
        ));
        // Unsupported period.
        assert!(matches!(
            node.handle_subscription(2, 500),
            WireMessage::SubscriptionResponse { accepted: false, .. }
        ));
        // Duplicate id.
        assert!(matches!(
            node.handle_subscription(1, 1000),
            WireMessage::SubscriptionResponse { accepted: false, .. }
        ));
        // Fresh id still works and becomes the active one.
        assert!(matches!(
            node.handle_subscription(5, 1000),
            WireMessage::SubscriptionResponse { accepted: true, .. }
        ));
        assert_eq!(node.active_subscription(), Some(5));
    }

    #[test]
    fn report_without_subscription_errors() {
        let mut node = E2Node::new();
        node.handle_setup(1);
        assert!(matches!(
            node.on_report(&report("ue-a", &[100])),
            Err(E2Error::NoActiveSubscription)
        ));
    }

    #[test]
    fn second_flushes_when_next_opens() {
        let mut node = ready_node();
        let out = node.on_report(&report("ue-a", &[100, 400])).unwrap();
        assert!(out.is_empty(), "second 0 still open");
        let out = node.on_report(&report("ue-a", &[1100])).unwrap();
        assert_eq!(seconds_of(&out), vec![0]);
        match &out[0] {
            WireMessage::RicIndication {
                subscription_id,
                ue_id,
                measurements,
                ..
            } => {
                assert_eq!(*subscription_id, 1);
                assert_eq!(ue_id, "ue-a");
                assert_eq!(measurements.len(), 2);
                // Quantized exactly like the wire path.
                assert_eq!(measurements[0].rsrp_cdb, -9000);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ues_window_independently() {
        let mut node = ready_node();
        let mut per_ue: BTreeMap<String, Vec<u64>> = BTreeMap::new();
        let push = |msgs: Vec<WireMessage>, per_ue: &mut BTreeMap<String, Vec<u64>>| {
            for m in msgs {
                if let WireMessage::RicIndication {
                    ue_id,
                    second_index,
                    ..
                } = m
                {
                    per_ue.entry(ue_id).or_default().push(second_index);
                }
            }
        };
        for s in 0..3u64 {
            push(node.on_report(&report("ue-a", &[s * 1000 + 10])).unwrap(), &mut per_ue);
            push(node.on_report(&report("ue-b", &[s * 1000 + 20])).unwrap(), &mut per_ue);
        }
        push(node.flush_all(), &mut per_ue);
        assert_eq!(per_ue["ue-a"], vec![0, 1, 2]);
        assert_eq!(per_ue["ue-b"], vec![0, 1, 2]);
    }

    #[test]
    fn late_measurement_dropped_and_counted() {
        let mut node = ready_node();
        node.on_report(&report("ue-a", &[100])).unwrap();
        node.on_report(&report("ue-a", &[1100])).unwrap(); // flushes second 0
        let out = node.on_report(&report("ue-a", &[900])).unwrap();
        assert!(out.is_empty());
        assert_eq!(node.late_arrivals(), 1);
        // The current second is untouched.
        let out = node.flush_all();
        assert_eq!(seconds_of(&out), vec![1]);
    }

    #[test]
    fn coverage_gap_emits_empty_indications() {
        let mut node = ready_node();
        node.on_report(&report("ue-a", &[500])).unwrap();
        let out = node.on_report(&report("ue-a", &[4200])).unwrap();
        assert_eq!(seconds_of(&out), vec![0, 1, 2, 3]);
        let sizes: Vec<usize> = out
            .iter()
            .map(|m| match m {
                WireMessage::RicIndication { measurements, .. } => measurements.len(),
                other => panic!("unexpected {other:?}"),
            })
            .collect();
        assert_eq!(sizes, vec![1, 0, 0, 0]);
    }

    #[test]
    fn report_straddling_boundary_never_self_lates() {
        let mut node = ready_node();
        // Reversed order inside the report: second 2 then second 1.
        // Timestamp-sorted processing opens second 1 first, flushes it
        // when 2001 arrives, and drops nothing.
        let out = node.on_report(&report("ue-a", &[2001, 1999])).unwrap();
        assert_eq!(seconds_of(&out), vec![1]);
        assert_eq!(node.late_arrivals(), 0);
        let out = node.flush_all();
        assert_eq!(seconds_of(&out), vec![2]);
    }

    #[test]
    fn flush_all_drains_and_is_idempotent() {
        let mut node = ready_node();
        assert!(node.flush_all().is_empty());
        node.on_report(&report("ue-a", &[300, 600])).unwrap();
        let out = node.flush_all();
        assert_eq!(seconds_of(&out), vec![0]);
        assert!(node.flush_all().is_empty());
        // Post-drain stale data is late.
        let out = node.on_report(&report("ue-a", &[700])).unwrap();
        assert!(out.is_empty());
        assert_eq!(node.late_arrivals(), 1);
    }

    #[test]
    fn conservation_and_ordering_over_generated_stream() {
        use crate::sim::scenario::parse_scenario;
        let scenario = parse_scenario(
            "\
duration_s = 30
seed = 3
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
x = 260
y = 0
tx_power_dbm = 43
[ue]
ue_id = 001010000000001
waypoints = 10,0 250,0
speed_mps = 17
[ue]
ue_id = 001010000000002
waypoints = 250,20 10,20
speed_mps = 9
",
        )
        .unwrap();
        let stream = scenario.generate().unwrap();
        let fed: usize = stream.iter().map(|r| r.report.neighbors.len()).sum();

        let mut node = ready_node();
        let mut emitted = 0usize;
        let mut per_ue: BTreeMap<String, Vec<u64>> = BTreeMap::new();
        let mut all = Vec::new();
        for labeled in &stream {
            all.extend(node.on_report(&labeled.report).unwrap());
        }
        all.extend(node.flush_all());
        for m in &all {
            if let WireMessage::RicIndication {
                ue_id,
                second_index,
                measurements,
                ..
            } = m
            {
                emitted += measurements.len();
                per_ue.entry(ue_id.clone()).or_default().push(*second_index);
            }
        }
        assert_eq!(node.late_arrivals(), 0);
        assert_eq!(emitted, fed, "every measurement lands in exactly one indication");
        assert_eq!(per_ue.len(), 2);
        for (ue, seconds) in &per_ue {
            assert!(
                seconds.windows(2).all(|w| w[0] < w[1]),
                "{ue} seconds not strictly increasing"
            );
            // Continuous coverage: one indication per wall second.
            let expected: Vec<u64> = (seconds[0]..=*seconds.last().unwrap()).collect();
            assert_eq!(seconds, &expected, "{ue} cadence broken");
        }
    }
}
