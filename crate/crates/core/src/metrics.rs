//! Age-of-information accounting.
//!
//! Slots are numbered from 1. Every node starts with age 1 at slot 1, as if
//! a packet generated at slot 0 had just been delivered. After a delivery
//! in slot `t` of a packet generated at `g`, the age in slot `t + 1` is
//! `t + 1 - g`; without a delivery it grows by one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::NodeId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("delivery slots must be ascending (slot {slot} follows {prev})")]
    Unsorted { prev: u64, slot: u64 },
    #[error("delivery at slot {slot} carries generation time {gen_time} from the future")]
    FutureGeneration { slot: u64, gen_time: u64 },
    #[error("delivery slot {slot} outside 1..={horizon}")]
    OutOfHorizon { slot: u64, horizon: u64 },
    #[error("{deliveries} delivery slots but {gen_times} generation times")]
    LengthMismatch { deliveries: usize, gen_times: usize },
    #[error("no samples after a warm-up of {warmup} slots")]
    EmptyWindow { warmup: u64 },
    #[error("node {node}: age at slot {slot} is {found}, expected {expected}")]
    RecursionBroken { node: usize, slot: u64, expected: u64, found: u64 },
    #[error("node {node}: trace has {found} samples, expected {expected}")]
    SampleCount { node: usize, expected: u64, found: u64 },
}

/// A successful reception at the base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub slot: u64,
    pub gen_time: u64,
}

/// Per-slot age of one node plus the deliveries that shaped it.
///
/// `ages[k]` is the age at slot `k + 1`. `ages` may be empty for runs that
/// only keep the delivery log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AoiTrace {
    pub node: NodeId,
    pub ages: Vec<u32>,
    pub deliveries: Vec<Delivery>,
}

impl AoiTrace {
    pub fn horizon(&self) -> u64 {
        self.ages.len() as u64
    }

    /// `(slot, age)` pairs.
    pub fn samples(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.ages.iter().enumerate().map(|(k, &a)| (k as u64 + 1, a))
    }
}

fn check_log(deliveries: &[Delivery], horizon: u64) -> Result<(), MetricsError> {
    let mut prev = 0u64;
    for d in deliveries {
        if d.slot < prev {
            return Err(MetricsError::Unsorted { prev, slot: d.slot });
        }
        if d.slot == 0 || d.slot > horizon {
            return Err(MetricsError::OutOfHorizon { slot: d.slot, horizon });
        }
        if d.gen_time > d.slot {
            return Err(MetricsError::FutureGeneration { slot: d.slot, gen_time: d.gen_time });
        }
        prev = d.slot;
    }
    Ok(())
}

/// Rebuilds the sawtooth from a delivery log: `age(t) = t - tau(t)` with
/// `tau(t)` the newest generation time delivered before slot `t`.
pub fn compute_age_series(
    node: NodeId,
    deliveries: &[u64],
    gen_times: &[u64],
    horizon: u64,
) -> Result<AoiTrace, MetricsError> {
    if deliveries.len() != gen_times.len() {
        return Err(MetricsError::LengthMismatch { deliveries: deliveries.len(), gen_times: gen_times.len() });
    }
    let log: Vec<Delivery> = deliveries
        .iter()
        .zip(gen_times)
        .map(|(&slot, &gen_time)| Delivery { slot, gen_time })
        .collect();
    trace_from_log(node, log, horizon)
}

pub fn trace_from_log(node: NodeId, log: Vec<Delivery>, horizon: u64) -> Result<AoiTrace, MetricsError> {
    check_log(&log, horizon)?;
    let mut ages = Vec::with_capacity(horizon as usize);
    let mut freshest = 0u64;
    let mut next = log.iter().peekable();
    for t in 1..=horizon {
        ages.push((t - freshest) as u32);
        while let Some(d) = next.next_if(|d| d.slot == t) {
            freshest = freshest.max(d.gen_time);
        }
    }
    Ok(AoiTrace { node, ages, deliveries: log })
}

/// Checks a recorded trace slot by slot against its own delivery log.
pub fn audit_trace(trace: &AoiTrace, horizon: u64) -> Result<(), MetricsError> {
    let node = trace.node.index();
    if trace.horizon() != horizon {
        return Err(MetricsError::SampleCount { node, expected: horizon, found: trace.horizon() });
    }
    check_log(&trace.deliveries, horizon)?;
    if let Some(&first) = trace.ages.first() {
        if first != 1 {
            return Err(MetricsError::RecursionBroken { node, slot: 1, expected: 1, found: first as u64 });
        }
    }
    let mut log = trace.deliveries.iter().peekable();
    for t in 1..horizon {
        let age = trace.ages[t as usize - 1] as u64;
        let mut expected = age + 1;
        while let Some(d) = log.next_if(|d| d.slot == t) {
            expected = expected.min(t + 1 - d.gen_time);
        }
        let found = trace.ages[t as usize] as u64;
        if found != expected {
            return Err(MetricsError::RecursionBroken { node, slot: t + 1, expected, found });
        }
    }
    Ok(())
}

/// Post-warm-up age totals for one node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeTotals {
    pub sum: u64,
    pub peak: u64,
    pub count: u64,
}

impl AgeTotals {
    pub fn push(&mut self, age: u64) {
        self.sum += age;
        self.peak = self.peak.max(age);
        self.count += 1;
    }

    pub fn merge(&mut self, other: &AgeTotals) {
        self.sum += other.sum;
        self.peak = self.peak.max(other.peak);
        self.count += other.count;
    }

    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.count as f64
    }
}

/// Age totals over slots `warmup+1..=horizon` derived from the delivery log
/// alone, one arithmetic series per inter-delivery segment.
pub fn replay_totals(log: &[Delivery], horizon: u64, warmup: u64) -> Result<AgeTotals, MetricsError> {
    check_log(log, horizon)?;
    let mut totals = AgeTotals::default();
    let mut freshest = 0u64;
    // segment start slot; ages in [start, end) are t - freshest
    let mut start = 1u64;
    let add_segment = |from: u64, to_inclusive: u64, freshest: u64, totals: &mut AgeTotals| {
        let from = from.max(warmup + 1);
        if from > to_inclusive {
            return;
        }
        let (a, b) = (from - freshest, to_inclusive - freshest);
        totals.sum += (a + b) * (b - a + 1) / 2;
        totals.peak = totals.peak.max(b);
        totals.count += b - a + 1;
    };
    for d in log {
        add_segment(start, d.slot, freshest, &mut totals);
        freshest = freshest.max(d.gen_time);
        start = d.slot + 1;
    }
    add_segment(start, horizon, freshest, &mut totals);
    Ok(totals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub node: usize,
    pub mean_age: f64,
    pub peak_age: u64,
    pub deliveries: u64,
    pub collisions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub nodes: Vec<NodeSummary>,
    /// Arithmetic mean of the per-node means.
    pub network_mean: f64,
    /// Largest per-node peak.
    pub network_peak: u64,
    /// Sum of log per-node mean ages.
    pub pf_objective: f64,
}

impl SummaryStats {
    pub fn from_totals(totals: &[AgeTotals], deliveries: &[u64], collisions: &[u64]) -> Self {
        let nodes: Vec<NodeSummary> = totals
            .iter()
            .enumerate()
            .map(|(i, t)| NodeSummary {
                node: i,
                mean_age: t.mean(),
                peak_age: t.peak,
                deliveries: deliveries.get(i).copied().unwrap_or(0),
                collisions: collisions.get(i).copied().unwrap_or(0),
            })
            .collect();
        let means: Vec<f64> = nodes.iter().map(|n| n.mean_age).collect();
        Self {
            network_mean: network_average(&means),
            network_peak: nodes.iter().map(|n| n.peak_age).max().unwrap_or(0),
            pf_objective: means.iter().map(|m| m.ln()).sum(),
            nodes,
        }
    }

    pub fn means(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.mean_age).collect()
    }

    /// Largest over smallest per-node mean age.
    pub fn fairness_ratio(&self) -> f64 {
        let means = self.means();
        let max = means.iter().cloned().fold(f64::MIN, f64::max);
        let min = means.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }
}

/// Network average convention: the plain mean of per-node means.
pub fn network_average(per_node_means: &[f64]) -> f64 {
    per_node_means.iter().sum::<f64>() / per_node_means.len() as f64
}

/// Summary over slots after `warmup`. Collision counts are zero; the
/// engine fills them in from its own counters.
pub fn summarize(traces: &[AoiTrace], warmup: u64) -> Result<SummaryStats, MetricsError> {
    let mut totals = Vec::with_capacity(traces.len());
    for trace in traces {
        let mut t = AgeTotals::default();
        for &age in trace.ages.iter().skip(warmup as usize) {
            t.push(age as u64);
        }
        if t.count == 0 {
            return Err(MetricsError::EmptyWindow { warmup });
        }
        totals.push(t);
    }
    let deliveries: Vec<u64> = traces
        .iter()
        .map(|t| t.deliveries.iter().filter(|d| d.slot > warmup).count() as u64)
        .collect();
    Ok(SummaryStats::from_totals(&totals, &deliveries, &[]))
}

/// Incremental version of [`summarize`] fed one slot at a time.
#[derive(Debug, Clone)]
pub struct StreamingSummary {
    warmup: u64,
    slot: u64,
    totals: Vec<AgeTotals>,
}

impl StreamingSummary {
    pub fn new(nodes: usize, warmup: u64) -> Self {
        Self { warmup, slot: 0, totals: vec![AgeTotals::default(); nodes] }
    }

    /// Ages of every node for the next slot.
    pub fn push_slot(&mut self, ages: &[u32]) {
        self.slot += 1;
        if self.slot > self.warmup {
            for (t, &a) in self.totals.iter_mut().zip(ages) {
                t.push(a as u64);
            }
        }
    }

    pub fn totals(&self) -> &[AgeTotals] {
        &self.totals
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn no_deliveries_counts_up() {
        let t = compute_age_series(NodeId(0), &[], &[], 6).unwrap();
        assert_eq!(t.ages, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn at_will_delivery_resets_to_one() {
        let t = compute_age_series(NodeId(0), &[5], &[5], 8).unwrap();
        assert_eq!(t.ages[5], 1);
        assert_eq!(t.ages, vec![1, 2, 3, 4, 5, 1, 2, 3]);
        audit_trace(&t, 8).unwrap();
    }

    #[test]
    fn queued_delivery_keeps_waiting_time() {
        let t = compute_age_series(NodeId(0), &[9], &[4], 12).unwrap();
        assert_eq!(t.ages[9], 6);
    }

    #[test]
    fn rejects_bad_logs() {
        assert!(matches!(compute_age_series(NodeId(0), &[5, 3], &[1, 1], 9), Err(MetricsError::Unsorted { .. })));
        assert!(matches!(compute_age_series(NodeId(0), &[5], &[6], 9), Err(MetricsError::FutureGeneration { .. })));
        assert!(matches!(compute_age_series(NodeId(0), &[10], &[6], 9), Err(MetricsError::OutOfHorizon { .. })));
        assert!(matches!(compute_age_series(NodeId(0), &[1], &[], 9), Err(MetricsError::LengthMismatch { .. })));
    }

    #[test]
    fn audit_catches_tampering() {
        let mut t = compute_age_series(NodeId(2), &[3, 7], &[3, 5], 10).unwrap();
        audit_trace(&t, 10).unwrap();
        t.ages[6] += 1;
        assert!(matches!(audit_trace(&t, 10), Err(MetricsError::RecursionBroken { node: 2, .. })));
    }

    #[test]
    fn constant_age_summary() {
        let trace = compute_age_series(NodeId(0), &(1..=10).collect::<Vec<_>>(), &(1..=10).collect::<Vec<_>>(), 10).unwrap();
        let s = summarize(&[trace], 0).unwrap();
        assert_eq!(s.nodes[0].mean_age, 1.0);
        assert_eq!(s.nodes[0].peak_age, 1);
        assert_eq!(s.network_mean, 1.0);
        assert_eq!(s.pf_objective, 0.0);
    }

    #[test]
    fn warmup_must_leave_samples() {
        let trace = compute_age_series(NodeId(0), &[], &[], 5).unwrap();
        assert!(matches!(summarize(&[trace.clone()], 5), Err(MetricsError::EmptyWindow { warmup: 5 })));
        let s = summarize(&[trace], 3).unwrap();
        assert_eq!(s.nodes[0].mean_age, 4.5);
        assert_eq!(s.nodes[0].peak_age, 5);
    }

    #[test]
    fn known_average_rows() {
        // per-source means and the reported averages for the three protocols
        let rows: [(&[f64], f64); 3] = [
            (&[3.85, 3.93, 3.55, 5.79, 5.05, 16.52, 14.95], 7.66),
            (&[5.18, 6.57, 5.05, 3.90, 5.24, 5.78, 4.07], 5.11),
            (&[4.70, 4.36, 3.94, 4.33, 3.79, 6.74, 9.05], 5.27),
        ];
        for (values, avg) in rows {
            assert!((network_average(values) - avg).abs() <= 0.01);
        }
    }

    fn delivery_log() -> impl Strategy<Value = (Vec<Delivery>, u64)> {
        (1u64..400).prop_flat_map(|horizon| {
            prop::collection::vec((1..=horizon, 0u64..30), 0..40).prop_map(move |mut raw| {
                raw.sort();
                raw.dedup_by_key(|r| r.0);
                let log = raw
                    .into_iter()
                    .map(|(slot, lag)| Delivery { slot, gen_time: slot.saturating_sub(lag) })
                    .collect();
                (log, horizon)
            })
        })
    }

    proptest! {
        #[test]
        fn replay_matches_trace((log, horizon) in delivery_log(), warmup_frac in 0.0f64..1.0) {
            let warmup = (horizon as f64 * warmup_frac) as u64;
            let trace = trace_from_log(NodeId(0), log.clone(), horizon).unwrap();
            audit_trace(&trace, horizon).unwrap();
            let mut direct = AgeTotals::default();
            for &a in trace.ages.iter().skip(warmup as usize) {
                direct.push(a as u64);
            }
            prop_assert_eq!(replay_totals(&log, horizon, warmup).unwrap(), direct);
        }

        #[test]
        fn streaming_matches_batch((log, horizon) in delivery_log(), chunk in 1usize..50, warmup_frac in 0.0f64..0.9) {
            let warmup = (horizon as f64 * warmup_frac) as u64;
            let a = trace_from_log(NodeId(0), log.clone(), horizon).unwrap();
            let b = trace_from_log(NodeId(1), log.iter().map(|d| Delivery { slot: d.slot, gen_time: d.slot }).collect(), horizon).unwrap();
            let batch = summarize(&[a.clone(), b.clone()], warmup).unwrap();

            // feed in chunks into independent accumulators, then merge
            let mut merged = vec![AgeTotals::default(); 2];
            let mut slot = 0usize;
            while slot < horizon as usize {
                let end = (slot + chunk).min(horizon as usize);
                let mut part = StreamingSummary::new(2, warmup.saturating_sub(slot as u64));
                for k in slot..end {
                    part.push_slot(&[a.ages[k], b.ages[k]]);
                }
                for (m, t) in merged.iter_mut().zip(part.totals()) {
                    m.merge(t);
                }
                slot = end;
            }
            let streamed = SummaryStats::from_totals(&merged, &[batch.nodes[0].deliveries, batch.nodes[1].deliveries], &[]);
            prop_assert_eq!(streamed, batch);
        }
    }
}
