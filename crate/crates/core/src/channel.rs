//! Rayleigh block fading and SIR-threshold capture.
//!
//! Each transmitter's instantaneous received power is exponential with mean
//! equal to its average power. Node `i` is decoded iff its power is at least
//! `theta` times the sum of every other transmitter's power. Noise is not
//! modeled, so a lone transmitter is always decoded.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::units::{NodeId, Topology};

/// Nodes transmitting in one slot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SlotTransmissionSet {
    pub transmitters: Vec<NodeId>,
}

impl SlotTransmissionSet {
    pub fn new(transmitters: Vec<NodeId>) -> Self {
        Self { transmitters }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaptureOutcome {
    pub decoded: Vec<NodeId>,
    /// Instantaneous powers, parallel to the transmission set. Empty when no
    /// draw was needed.
    pub gains: Vec<f64>,
}

/// Exponential(1) from one 64-bit word by inversion.
fn unit_exponential(word: u64) -> f64 {
    // 53 random mantissa bits, u in [0, 1)
    let u = (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    -(1.0 - u).ln()
}

/// Indices into `gains` that clear the capture threshold.
///
/// With `theta > 1` at most one index can qualify.
pub fn decide_capture(gains: &[f64], theta: f64, out: &mut Vec<usize>) {
    out.clear();
    if gains.len() == 1 {
        out.push(0);
        return;
    }
    let total: f64 = gains.iter().sum();
    for (k, &g) in gains.iter().enumerate() {
        if g >= theta * (total - g) {
            out.push(k);
        }
    }
}

/// Resolves one slot with fading draws taken in order from `rng`.
pub fn resolve_slot<R: Rng + ?Sized>(topology: &Topology, tx: &SlotTransmissionSet, rng: &mut R) -> CaptureOutcome {
    match tx.transmitters.len() {
        0 => CaptureOutcome::default(),
        1 => CaptureOutcome { decoded: tx.transmitters.clone(), gains: Vec::new() },
        _ => {
            let gains: Vec<f64> = tx
                .transmitters
                .iter()
                .map(|&n| topology.power(n).linear() * unit_exponential(rng.next_u64()))
                .collect();
            let mut hits = Vec::new();
            decide_capture(&gains, topology.theta(), &mut hits);
            CaptureOutcome { decoded: hits.into_iter().map(|k| tx.transmitters[k]).collect(), gains }
        }
    }
}

/// Fading source addressed by `(slot, node)`.
///
/// Every draw lives at a fixed position of a dedicated ChaCha stream, so two
/// runs sharing a seed see the same fading for the same transmission set no
/// matter how their MAC histories differ.
#[derive(Debug, Clone)]
pub struct ChannelStream {
    rng: ChaCha8Rng,
    nodes: u128,
    mean_power: Vec<f64>,
    theta: f64,
}

/// Stream id reserved for fading within a run's ChaCha generator.
pub const CHANNEL_STREAM: u64 = 1;

impl ChannelStream {
    pub fn new(topology: &Topology, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(CHANNEL_STREAM);
        Self {
            rng,
            nodes: topology.len() as u128,
            mean_power: topology.powers().iter().map(|p| p.linear()).collect(),
            theta: topology.theta(),
        }
    }

    /// Instantaneous power of `node` in `slot`.
    pub fn gain(&mut self, slot: u64, node: NodeId) -> f64 {
        // two 32-bit words per draw
        self.rng.set_word_pos((slot as u128 * self.nodes + node.0 as u128) * 2);
        self.mean_power[node.0] * unit_exponential(self.rng.next_u64())
    }

    /// Capture decision for `transmitters` in `slot`; decoded nodes go to `decoded`.
    pub fn resolve(&mut self, slot: u64, transmitters: &[NodeId], gains: &mut Vec<f64>, decoded: &mut Vec<NodeId>) {
        decoded.clear();
        gains.clear();
        match transmitters.len() {
            0 => {}
            1 => decoded.push(transmitters[0]),
            _ => {
                // one seek per slot, then read node draws in index order
                let last = transmitters.iter().map(|n| n.0).max().unwrap_or(0);
                self.rng.set_word_pos(slot as u128 * self.nodes * 2);
                let mut draws = [0f64; 64];
                let mut spill = Vec::new();
                let slot_draws: &mut [f64] = if last < draws.len() {
                    &mut draws[..=last]
                } else {
                    spill.resize(last + 1, 0.0);
                    &mut spill
                };
                for d in slot_draws.iter_mut() {
                    *d = unit_exponential(self.rng.next_u64());
                }
                gains.extend(transmitters.iter().map(|&n| self.mean_power[n.0] * slot_draws[n.0]));
                let mut hits = Vec::with_capacity(1);
                decide_capture(gains, self.theta, &mut hits);
                decoded.extend(hits.into_iter().map(|k| transmitters[k]));
            }
        }
    }
}
