//! Packet arrival processes. Each node draws from its own stream so arrival
//! sequences do not depend on the access policy.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ArrivalProcess {
    /// A fresh update is sampled right before each transmission.
    SampleAtWill,
    /// Deterministic arrivals at `rate` packets per slot with a random phase.
    Periodic { rate: f64 },
    /// Poisson number of arrivals per slot.
    Poisson { rate: f64 },
    /// Markov on/off source with geometric sojourns; Poisson arrivals while on.
    BurstyOnOff { on_rate: f64, mean_on: f64, mean_off: f64 },
    /// Explicit generation slots (ascending).
    Trace { slots: Vec<u64> },
}

impl ArrivalProcess {
    /// Long-run packets per slot, if defined.
    pub fn mean_rate(&self) -> Option<f64> {
        match self {
            ArrivalProcess::SampleAtWill | ArrivalProcess::Trace { .. } => None,
            ArrivalProcess::Periodic { rate } | ArrivalProcess::Poisson { rate } => Some(*rate),
            ArrivalProcess::BurstyOnOff { on_rate, mean_on, mean_off } => Some(on_rate * mean_on / (mean_on + mean_off)),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be a finite non-negative number, got {v}"))
            }
        };
        match self {
            ArrivalProcess::SampleAtWill => Ok(()),
            ArrivalProcess::Periodic { rate } | ArrivalProcess::Poisson { rate } => nonneg("rate", *rate),
            ArrivalProcess::BurstyOnOff { on_rate, mean_on, mean_off } => {
                nonneg("on_rate", *on_rate)?;
                for (name, v) in [("mean_on", *mean_on), ("mean_off", *mean_off)] {
                    if !(v.is_finite() && v >= 1.0) {
                        return Err(format!("{name} must be at least one slot, got {v}"));
                    }
                }
                Ok(())
            }
            ArrivalProcess::Trace { slots } => {
                if slots.windows(2).any(|w| w[1] < w[0]) {
                    Err("trace slots must be ascending".into())
                } else if slots.first() == Some(&0) {
                    Err("trace slots start at 1".into())
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
enum GenState {
    AtWill,
    Periodic { rate: f64, phase: f64 },
    Poisson(Option<Poisson<f64>>),
    Bursty { on: Option<Poisson<f64>>, p_leave_on: f64, p_leave_off: f64, is_on: bool },
    Trace { slots: Vec<u64>, next: usize },
}

fn poisson(rate: f64) -> Option<Poisson<f64>> {
    (rate > 0.0).then(|| Poisson::new(rate).expect("validated rate"))
}

#[derive(Debug, Clone)]
pub struct ArrivalGenerator {
    state: GenState,
    rng: ChaCha8Rng,
}

impl ArrivalGenerator {
    pub fn new(process: &ArrivalProcess, mut rng: ChaCha8Rng) -> Self {
        let state = match process {
            ArrivalProcess::SampleAtWill => GenState::AtWill,
            ArrivalProcess::Periodic { rate } => GenState::Periodic { rate: *rate, phase: rng.random::<f64>() },
            ArrivalProcess::Poisson { rate } => GenState::Poisson(poisson(*rate)),
            ArrivalProcess::BurstyOnOff { on_rate, mean_on, mean_off } => {
                let is_on = rng.random_bool(mean_on / (mean_on + mean_off));
                GenState::Bursty {
                    on: poisson(*on_rate),
                    p_leave_on: 1.0 / mean_on,
                    p_leave_off: 1.0 / mean_off,
                    is_on,
                }
            }
            ArrivalProcess::Trace { slots } => GenState::Trace { slots: slots.clone(), next: 0 },
        };
        Self { state, rng }
    }

    pub fn is_at_will(&self) -> bool {
        matches!(self.state, GenState::AtWill)
    }

    /// Number of packets generated in `slot` (slots start at 1).
    pub fn arrivals(&mut self, slot: u64) -> u64 {
        match &mut self.state {
            GenState::AtWill => 0,
            GenState::Periodic { rate, phase } => {
                let now = (*phase + slot as f64 * *rate).floor();
                let before = (*phase + (slot - 1) as f64 * *rate).floor();
                (now - before) as u64
            }
            GenState::Poisson(dist) => dist.as_ref().map_or(0, |d| d.sample(&mut self.rng) as u64),
            GenState::Bursty { on, p_leave_on, p_leave_off, is_on } => {
                let n = if *is_on { on.as_ref().map_or(0, |d| d.sample(&mut self.rng) as u64) } else { 0 };
                let leave = if *is_on { *p_leave_on } else { *p_leave_off };
                if self.rng.random_bool(leave.min(1.0)) {
                    *is_on = !*is_on;
                }
                n
            }
            GenState::Trace { slots, next } => {
                while *next < slots.len() && slots[*next] < slot {
                    *next += 1;
                }
                let start = *next;
                while *next < slots.len() && slots[*next] == slot {
                    *next += 1;
                }
                (*next - start) as u64
            }
        }
    }
}
