//! The slotted MAC simulator: queues, arrivals, backoff samplers and the
//! engine that steps them.

pub mod arrivals;
pub mod backoff;
pub mod engine;
pub mod queue;

pub use arrivals::{ArrivalGenerator, ArrivalProcess};
pub use backoff::{sample_backoff_fpga, sample_backoff_uniform, FpgaRngState, SamplerKind};
pub use engine::{run, Event, EventKind, NodeMacState, NodeStats, RecordLevel, RunOutput, SimConfig, SimError, Simulation, SlotEvents};
pub use queue::{Packet, PacketQueue, PushOutcome, QueueDiscipline};

#[cfg(test)]
mod tests;
