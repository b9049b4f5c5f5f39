use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::units::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub source: NodeId,
    pub gen_time: u64,
    /// Metadata only; every packet occupies one slot on air.
    pub size_bytes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueueDiscipline {
    /// Holds only the newest packet.
    LcfsSinglePacket,
    /// First come first served, unbounded when `capacity` is `None`.
    Fcfs { capacity: Option<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushOutcome {
    Stored,
    /// LCFS: the older packet was discarded.
    Replaced,
    /// FCFS at capacity: the arriving packet was dropped.
    Overflow,
}

#[derive(Debug, Clone)]
pub struct PacketQueue {
    discipline: QueueDiscipline,
    packets: VecDeque<Packet>,
}

impl PacketQueue {
    pub fn new(discipline: QueueDiscipline) -> Self {
        Self { discipline, packets: VecDeque::new() }
    }

    pub fn push(&mut self, packet: Packet) -> PushOutcome {
        match self.discipline {
            QueueDiscipline::LcfsSinglePacket => {
                let replaced = self.packets.pop_front().is_some();
                self.packets.push_back(packet);
                if replaced {
                    PushOutcome::Replaced
                } else {
                    PushOutcome::Stored
                }
            }
            QueueDiscipline::Fcfs { capacity } => {
                if capacity.is_some_and(|c| self.packets.len() >= c) {
                    PushOutcome::Overflow
                } else {
                    self.packets.push_back(packet);
                    PushOutcome::Stored
                }
            }
        }
    }

    pub fn head(&self) -> Option<&Packet> {
        self.packets.front()
    }

    pub fn pop(&mut self) -> Option<Packet> {
        self.packets.pop_front()
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(t: u64) -> Packet {
        Packet { source: NodeId(0), gen_time: t, size_bytes: 100 }
    }

    #[test]
    fn lcfs_keeps_newest_only() {
        let mut q = PacketQueue::new(QueueDiscipline::LcfsSinglePacket);
        assert_eq!(q.push(pkt(1)), PushOutcome::Stored);
        assert_eq!(q.push(pkt(2)), PushOutcome::Replaced);
        assert_eq!(q.push(pkt(3)), PushOutcome::Replaced);
        assert_eq!(q.len(), 1);
        assert_eq!(q.head().unwrap().gen_time, 3);
    }

    #[test]
    fn fcfs_order_and_capacity() {
        let mut q = PacketQueue::new(QueueDiscipline::Fcfs { capacity: Some(2) });
        q.push(pkt(1));
        q.push(pkt(2));
        assert_eq!(q.push(pkt(3)), PushOutcome::Overflow);
        assert_eq!(q.pop().unwrap().gen_time, 1);
        assert_eq!(q.pop().unwrap().gen_time, 2);
        assert!(q.pop().is_none());
    }
}
