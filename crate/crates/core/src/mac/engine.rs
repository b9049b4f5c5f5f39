//! Slot-synchronous DCF simulator.
//!
//! One slot carries one packet. Within slot `t`:
//!
//! 1. arrivals generated in `t` enter the queues;
//! 2. every node whose backoff is zero and that has a packet transmits (in
//!    Bernoulli mode it transmits with its fixed probability instead);
//! 3. the channel decides which transmissions are captured;
//! 4. successes leave the queue, clear the retry count and, under DCF,
//!    restore the initial window;
//! 5. failures count a retry; once more than `retry_limit` retries have
//!    failed the packet is dropped and DCF doubles its window (capped at
//!    1023), while WiFair windows never change;
//! 6. if nobody transmitted, every non-zero backoff counts down, otherwise
//!    all counters stay frozen;
//! 7. nodes that transmitted draw a new backoff from their current window.
//!
//! Acknowledgements are instantaneous and free.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::arrivals::{ArrivalGenerator, ArrivalProcess};
use super::backoff::{sample_backoff_fpga, sample_backoff_uniform, FpgaRngState, SamplerKind};
use super::queue::{Packet, PacketQueue, PushOutcome, QueueDiscipline};
use crate::channel::ChannelStream;
use crate::metrics::{AgeTotals, AoiTrace, Delivery, SummaryStats};
use crate::policy::{PolicyError, PolicySpec, MAX_CW};
use crate::units::{NodeId, Topology};

const MAC_STREAM_BASE: u64 = 1_000;
const ARRIVAL_STREAM_BASE: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("node {node}: {msg}")]
    Arrival { node: usize, msg: String },
    #[error("{got} arrival processes for {expected} nodes")]
    ArrivalCount { expected: usize, got: usize },
    #[error("sample-at-will arrivals require the LCFS single-packet queue")]
    AtWillNeedsLcfs,
    #[error("warm-up ({warmup}) must be shorter than the horizon ({horizon})")]
    Warmup { warmup: u64, horizon: u64 },
    #[error("full trace recording supports at most {max} slots, got {horizon}")]
    HorizonTooLong { horizon: u64, max: u64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordLevel {
    /// Per-slot ages and the full event log.
    #[default]
    Full,
    /// Delivery log and running totals only.
    Summary,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub topology: Topology,
    pub policy: PolicySpec,
    pub queue: QueueDiscipline,
    /// One process per node.
    pub arrivals: Vec<ArrivalProcess>,
    pub retry_limit: u32,
    pub sampler: SamplerKind,
    pub horizon: u64,
    pub warmup: u64,
    pub seed: u64,
    pub packet_size_bytes: u32,
    pub record: RecordLevel,
}

impl SimConfig {
    /// Saturated sources: LCFS single-packet queues sampled at will.
    pub fn saturated(topology: Topology, policy: PolicySpec, horizon: u64, seed: u64) -> Self {
        let n = topology.len();
        Self {
            topology,
            policy,
            queue: QueueDiscipline::LcfsSinglePacket,
            arrivals: vec![ArrivalProcess::SampleAtWill; n],
            retry_limit: 0,
            sampler: SamplerKind::Uniform,
            horizon,
            warmup: 0,
            seed,
            packet_size_bytes: 100,
            record: RecordLevel::Full,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.topology.len();
        self.policy.validate(n)?;
        if self.arrivals.len() != n {
            return Err(SimError::ArrivalCount { expected: n, got: self.arrivals.len() });
        }
        for (node, a) in self.arrivals.iter().enumerate() {
            a.validate().map_err(|msg| SimError::Arrival { node, msg })?;
            if matches!(a, ArrivalProcess::SampleAtWill) && self.queue != QueueDiscipline::LcfsSinglePacket {
                return Err(SimError::AtWillNeedsLcfs);
            }
        }
        if self.warmup > 0 && self.warmup >= self.horizon {
            return Err(SimError::Warmup { warmup: self.warmup, horizon: self.horizon });
        }
        let max = u32::MAX as u64;
        if self.record == RecordLevel::Full && self.horizon > max {
            return Err(SimError::HorizonTooLong { horizon: self.horizon, max });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum EventKind {
    Delivery { gen_time: u64 },
    Collision,
    /// Retry budget exhausted; the queued packet was discarded.
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub slot: u64,
    pub node: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeStats {
    pub arrivals: u64,
    pub attempts: u64,
    pub deliveries: u64,
    pub collisions: u64,
    pub retry_drops: u64,
    pub overflow_drops: u64,
    /// LCFS packets superseded by a newer arrival.
    pub replaced: u64,
    /// Post-warm-up age totals accumulated slot by slot.
    pub age: AgeTotals,
}

#[derive(Debug, Clone)]
pub struct NodeMacState {
    pub backoff: u16,
    pub cw_current: u16,
    pub retries: u32,
    pub queue: PacketQueue,
}

#[derive(Debug, Clone)]
enum Access {
    Backoff { windows: Vec<u16>, doubling: bool },
    Bernoulli { p: Vec<f64> },
}

/// What happened in one slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlotEvents {
    pub slot: u64,
    pub transmitters: Vec<NodeId>,
    /// Instantaneous powers parallel to `transmitters`; empty unless two or
    /// more nodes transmitted.
    pub gains: Vec<f64>,
    pub decoded: Vec<NodeId>,
    pub dropped: Vec<NodeId>,
}

impl SlotEvents {
    pub fn busy(&self) -> bool {
        !self.transmitters.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub horizon: u64,
    pub warmup: u64,
    pub traces: Vec<AoiTrace>,
    pub events: Vec<Event>,
    pub stats: Vec<NodeStats>,
    /// Packets still queued at the horizon.
    pub backlog: Vec<u64>,
    /// Initial contention window of every node (absent in Bernoulli mode).
    pub initial_windows: Option<Vec<u16>>,
    /// `None` when the run has no post-warm-up slots.
    pub summary: Option<SummaryStats>,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub struct Simulation {
    topology: Topology,
    access: Access,
    retry_limit: u32,
    sampler: SamplerKind,
    horizon: u64,
    warmup: u64,
    packet_size_bytes: u32,
    record: RecordLevel,

    nodes: Vec<NodeMacState>,
    arrivals: Vec<ArrivalGenerator>,
    at_will: Vec<bool>,
    mac_rngs: Vec<ChaCha8Rng>,
    fpga: Vec<FpgaRngState>,
    channel: ChannelStream,

    slot: u64,
    /// Age each node will have in the next slot.
    ages: Vec<u64>,
    stats: Vec<NodeStats>,
    counted_collisions: Vec<u64>,
    logs: Vec<Vec<Delivery>>,
    samples: Vec<Vec<u32>>,
    events: Vec<Event>,
    current: SlotEvents,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let n = cfg.topology.len();
        let access = match &cfg.policy {
            PolicySpec::Dcf80211 { initial_cw } => Access::Backoff { windows: vec![*initial_cw; n], doubling: true },
            PolicySpec::WiFairPf { cws } | PolicySpec::WiFairTa { cws } => {
                Access::Backoff { windows: cws.clone(), doubling: false }
            }
            PolicySpec::FixedBernoulli { p } => Access::Bernoulli { p: p.clone() },
        };
        let mut mac_rngs: Vec<ChaCha8Rng> = (0..n as u64).map(|i| stream(cfg.seed, MAC_STREAM_BASE + i)).collect();
        let mut fpga: Vec<FpgaRngState> = (0..n as u64).map(|i| FpgaRngState::new(splitmix(cfg.seed ^ splitmix(i)))).collect();
        let nodes = (0..n)
            .map(|i| {
                let cw = match &access {
                    Access::Backoff { windows, .. } => windows[i],
                    Access::Bernoulli { .. } => 0,
                };
                let backoff = match cfg.sampler {
                    SamplerKind::Uniform => sample_backoff_uniform(cw, &mut mac_rngs[i]),
                    SamplerKind::Fpga => sample_backoff_fpga(cw, &mut fpga[i]),
                };
                NodeMacState { backoff, cw_current: cw, retries: 0, queue: PacketQueue::new(cfg.queue) }
            })
            .collect();
        let arrivals: Vec<ArrivalGenerator> = cfg
            .arrivals
            .iter()
            .enumerate()
            .map(|(i, a)| ArrivalGenerator::new(a, stream(cfg.seed, ARRIVAL_STREAM_BASE + i as u64)))
            .collect();
        let full = cfg.record == RecordLevel::Full;
        Ok(Self {
            channel: ChannelStream::new(&cfg.topology, cfg.seed),
            at_will: arrivals.iter().map(|a| a.is_at_will()).collect(),
            arrivals,
            access,
            retry_limit: cfg.retry_limit,
            sampler: cfg.sampler,
            horizon: cfg.horizon,
            warmup: cfg.warmup,
            packet_size_bytes: cfg.packet_size_bytes,
            record: cfg.record,
            nodes,
            mac_rngs,
            fpga,
            slot: 0,
            ages: vec![1; n],
            stats: vec![NodeStats::default(); n],
            counted_collisions: vec![0; n],
            logs: vec![Vec::new(); n],
            samples: (0..n)
                .map(|_| if full { Vec::with_capacity(cfg.horizon as usize) } else { Vec::new() })
                .collect(),
            events: Vec::new(),
            current: SlotEvents::default(),
            topology: cfg.topology,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn node(&self, i: usize) -> &NodeMacState {
        &self.nodes[i]
    }

    pub fn stats(&self) -> &[NodeStats] {
        &self.stats
    }

    /// Last completed slot (0 before the first step).
    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn is_finished(&self) -> bool {
        self.slot >= self.horizon
    }

    fn resample(&mut self, i: usize) {
        let cw = self.nodes[i].cw_current;
        self.nodes[i].backoff = match self.sampler {
            SamplerKind::Uniform => sample_backoff_uniform(cw, &mut self.mac_rngs[i]),
            SamplerKind::Fpga => sample_backoff_fpga(cw, &mut self.fpga[i]),
        };
    }

    /// Advances one slot and reports what happened in it.
    pub fn step_slot(&mut self) -> &SlotEvents {
        self.slot += 1;
        let t = self.slot;
        let n = self.nodes.len();
        let full = self.record == RecordLevel::Full;
        let counted = t > self.warmup;

        for i in 0..n {
            let age = self.ages[i];
            if full {
                self.samples[i].push(age as u32);
            }
            if counted {
                self.stats[i].age.push(age);
            }
        }

        // 1. arrivals
        for i in 0..n {
            let k = self.arrivals[i].arrivals(t);
            for _ in 0..k {
                let packet = Packet { source: NodeId(i), gen_time: t, size_bytes: self.packet_size_bytes };
                self.stats[i].arrivals += 1;
                match self.nodes[i].queue.push(packet) {
                    PushOutcome::Stored => {}
                    PushOutcome::Replaced => self.stats[i].replaced += 1,
                    PushOutcome::Overflow => self.stats[i].overflow_drops += 1,
                }
            }
        }

        // 2. transmissions
        let ev = &mut self.current;
        ev.slot = t;
        ev.transmitters.clear();
        ev.dropped.clear();
        for i in 0..n {
            let has_packet = self.at_will[i] || !self.nodes[i].queue.is_empty();
            if !has_packet {
                continue;
            }
            let go = match &self.access {
                Access::Backoff { .. } => self.nodes[i].backoff == 0,
                Access::Bernoulli { p } => self.mac_rngs[i].random_bool(p[i]),
            };
            if go {
                ev.transmitters.push(NodeId(i));
            }
        }

        // 3. capture
        self.channel.resolve(t, &ev.transmitters, &mut ev.gains, &mut ev.decoded);

        // 4-5. outcomes
        let doubling = matches!(self.access, Access::Backoff { doubling: true, .. });
        for k in 0..self.current.transmitters.len() {
            let i = self.current.transmitters[k].0;
            let decoded = self.current.decoded.contains(&NodeId(i));
            let gen_time = if self.at_will[i] { t } else { self.nodes[i].queue.head().map_or(t, |p| p.gen_time) };
            let stats = &mut self.stats[i];
            stats.attempts += 1;
            let node = &mut self.nodes[i];
            if decoded {
                if !self.at_will[i] {
                    node.queue.pop();
                }
                node.retries = 0;
                if let Access::Backoff { windows, doubling: true } = &self.access {
                    node.cw_current = windows[i];
                }
                stats.deliveries += 1;
                self.logs[i].push(Delivery { slot: t, gen_time });
                self.ages[i] = (self.ages[i] + 1).min(t + 1 - gen_time);
                if full {
                    self.events.push(Event { slot: t, node: i, kind: EventKind::Delivery { gen_time } });
                }
            } else {
                stats.collisions += 1;
                if counted {
                    self.counted_collisions[i] += 1;
                }
                node.retries += 1;
                if full {
                    self.events.push(Event { slot: t, node: i, kind: EventKind::Collision });
                }
                if node.retries > self.retry_limit {
                    node.retries = 0;
                    if !self.at_will[i] && node.queue.pop().is_some() {
                        stats.retry_drops += 1;
                        self.current.dropped.push(NodeId(i));
                        if full {
                            self.events.push(Event { slot: t, node: i, kind: EventKind::Drop });
                        }
                    }
                    if doubling {
                        node.cw_current = node.cw_current.saturating_mul(2).min(MAX_CW);
                    }
                }
                self.ages[i] += 1;
            }
        }
        for i in 0..n {
            if !self.current.transmitters.contains(&NodeId(i)) {
                self.ages[i] += 1;
            }
        }

        // 6-7. backoff counters
        if let Access::Backoff { .. } = self.access {
            if self.current.transmitters.is_empty() {
                for node in &mut self.nodes {
                    node.backoff = node.backoff.saturating_sub(1);
                }
            } else {
                for k in 0..self.current.transmitters.len() {
                    let i = self.current.transmitters[k].0;
                    self.resample(i);
                }
            }
        }

        &self.current
    }

    pub fn finish(self) -> RunOutput {
        let initial_windows = match &self.access {
            Access::Backoff { windows, .. } => Some(windows.clone()),
            Access::Bernoulli { .. } => None,
        };
        let backlog = self.nodes.iter().map(|n| n.queue.len() as u64).collect();
        let summary = (self.slot > self.warmup).then(|| {
            let totals: Vec<AgeTotals> = self.stats.iter().map(|s| s.age).collect();
            let deliveries: Vec<u64> = self
                .logs
                .iter()
                .map(|log| log.iter().filter(|d| d.slot > self.warmup).count() as u64)
                .collect();
            SummaryStats::from_totals(&totals, &deliveries, &self.counted_collisions)
        });
        let traces = self
            .logs
            .into_iter()
            .zip(self.samples)
            .enumerate()
            .map(|(i, (deliveries, ages))| AoiTrace { node: NodeId(i), ages, deliveries })
            .collect();
        RunOutput {
            horizon: self.slot,
            warmup: self.warmup,
            traces,
            events: self.events,
            stats: self.stats,
            backlog,
            initial_windows,
            summary,
        }
    }
}

/// Runs a configuration to its horizon.
pub fn run(cfg: SimConfig) -> Result<RunOutput, SimError> {
    let mut sim = Simulation::new(cfg)?;
    while !sim.is_finished() {
        sim.step_slot();
    }
    Ok(sim.finish())
}
