//! Round-based simulator of a fully connected cluster under the one-port
//! duplex model: per round, every node sends at most one message and receives
//! at most one message.
//!
//! A [`RoundSchedule`] is plain data. Each transfer carries a list of pieces,
//! each copying (or adding) a segment of a labelled block at the sender into a
//! segment of a labelled block at the receiver. Local computation happens
//! between schedule runs, directly on the [`NodeStore`].

mod broadcast;
mod collectives;
mod fault;
mod multi;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use broadcast::{
    binomial_plan, broadcast_external, broadcast_pipelined, broadcast_rounds, reduce_external, reduce_reversed, reduce_segments_auto,
    BlockPlan,
};
pub use collectives::{all_gather_rd, all_to_all_bruck, all_to_all_collect, all_to_all_load, all_to_all_pairwise, bruck_sized, A2A_PREFIX};
pub use fault::{stages, Fault, FaultKind, FaultScenario};
pub use multi::{multi_broadcast, multi_broadcast_external, multi_reduce, tune_segments, weighted_sum, ExternalReduce, MultiReduce};

use crate::cost::{CostLedger, RoundRecord, TransferRecord};
use crate::matrix::ComplexMatrix;
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub label: String,
    pub start: usize,
    pub len: usize,
}

impl Segment {
    pub fn new(label: impl Into<String>, start: usize, len: usize) -> Self {
        Self { label: label.into(), start, len }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delivery {
    /// Overwrite the destination segment.
    Store,
    /// Add into the destination segment.
    Accumulate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Piece {
    pub src: Segment,
    pub dst: Segment,
    pub delivery: Delivery,
}

impl Piece {
    /// Copy of a whole block: the receiver gets a block of the same shape
    /// (created if missing).
    pub fn whole(label: impl Into<String>, len: usize) -> Self {
        let label = label.into();
        Self { src: Segment::new(label.clone(), 0, len), dst: Segment::new(label, 0, len), delivery: Delivery::Store }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transfer {
    pub src: NodeId,
    pub dst: NodeId,
    pub pieces: Vec<Piece>,
}

impl Transfer {
    pub fn symbols(&self) -> usize {
        self.pieces.iter().map(|p| p.src.len).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Round {
    pub transfers: Vec<Transfer>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoundSchedule {
    pub stage: String,
    pub rounds: Vec<Round>,
}

impl RoundSchedule {
    pub fn new(stage: impl Into<String>) -> Self {
        Self { stage: stage.into(), rounds: Vec::new() }
    }

    pub fn with_stage(mut self, stage: impl Into<String>) -> Self {
        self.stage = stage.into();
        self
    }

    /// Map rank `i` to `members[i]`.
    pub fn relabel(&self, members: &[NodeId]) -> Self {
        let rounds = self
            .rounds
            .iter()
            .map(|r| Round {
                transfers: r
                    .transfers
                    .iter()
                    .map(|t| Transfer { src: members[t.src.0], dst: members[t.dst.0], pieces: t.pieces.clone() })
                    .collect(),
            })
            .collect();
        Self { stage: self.stage.clone(), rounds }
    }

    /// Run `other`'s rounds after this one's.
    pub fn then(mut self, other: RoundSchedule) -> Self {
        self.rounds.extend(other.rounds);
        self
    }

    /// Overlay `other` onto the same rounds (round i of both runs together).
    /// The caller is responsible for the node sets being disjoint.
    pub fn overlay(mut self, other: RoundSchedule) -> Self {
        if self.rounds.len() < other.rounds.len() {
            self.rounds.resize_with(other.rounds.len(), Round::default);
        }
        for (mine, theirs) in self.rounds.iter_mut().zip(other.rounds) {
            mine.transfers.extend(theirs.transfers);
        }
        self
    }

    /// Ledger of the schedule as written, without moving any data.
    pub fn ledger(&self) -> CostLedger {
        let bad = round_violations(self);
        CostLedger {
            rounds: self
                .rounds
                .iter()
                .enumerate()
                .map(|(i, r)| RoundRecord {
                    stage: self.stage.clone(),
                    transfers: r.transfers.iter().map(|t| TransferRecord { src: t.src.0, dst: t.dst.0, symbols: t.symbols() }).collect(),
                    one_port_ok: !bad.contains(&i),
                })
                .collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.rounds.iter().flat_map(|r| &r.transfers).map(|t| t.src.0.max(t.dst.0) + 1).max().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    TwoSends,
    TwoReceives,
    SelfSend,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Violation {
    pub round: usize,
    pub node: NodeId,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::TwoSends => "sends more than once",
            ViolationKind::TwoReceives => "receives more than once",
            ViolationKind::SelfSend => "sends to itself",
        };
        write!(f, "round {}: node {} {}", self.round, self.node.0, what)
    }
}

/// Check the one-port duplex rule for every round.
pub fn validate_one_port(schedule: &RoundSchedule) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    for (i, r) in schedule.rounds.iter().enumerate() {
        let mut senders: Vec<usize> = r.transfers.iter().map(|t| t.src.0).collect();
        let mut receivers: Vec<usize> = r.transfers.iter().map(|t| t.dst.0).collect();
        for t in &r.transfers {
            if t.src == t.dst {
                out.push(Violation { round: i, node: t.src, kind: ViolationKind::SelfSend });
            }
        }
        for (list, kind) in [(&mut senders, ViolationKind::TwoSends), (&mut receivers, ViolationKind::TwoReceives)] {
            list.sort_unstable();
            let mut last = None;
            for &n in list.iter() {
                if last == Some(n) && out.last().is_none_or(|v: &Violation| v.round != i || v.node.0 != n || v.kind != kind) {
                    out.push(Violation { round: i, node: NodeId(n), kind });
                }
                last = Some(n);
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn round_violations(schedule: &RoundSchedule) -> Vec<usize> {
    match validate_one_port(schedule) {
        Ok(()) => Vec::new(),
        Err(v) => v.into_iter().map(|v| v.round).collect(),
    }
}

/// Per-node labelled blocks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeStore {
    nodes: Vec<BTreeMap<String, ComplexMatrix>>,
}

impl NodeStore {
    pub fn new(nodes: usize) -> Self {
        Self { nodes: alloc::vec![BTreeMap::new(); nodes] }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, node: NodeId, label: &str) -> Option<&ComplexMatrix> {
        self.nodes.get(node.0)?.get(label)
    }

    pub fn get_mut(&mut self, node: NodeId, label: &str) -> Option<&mut ComplexMatrix> {
        self.nodes.get_mut(node.0)?.get_mut(label)
    }

    pub fn insert(&mut self, node: NodeId, label: impl Into<String>, block: ComplexMatrix) {
        self.nodes[node.0].insert(label.into(), block);
    }

    pub fn remove(&mut self, node: NodeId, label: &str) -> Option<ComplexMatrix> {
        self.nodes.get_mut(node.0)?.remove(label)
    }

    /// Drop every block whose label starts with `prefix`.
    pub fn clear_prefix(&mut self, prefix: &str) {
        for n in &mut self.nodes {
            n.retain(|k, _| !k.starts_with(prefix));
        }
    }

    pub fn labels(&self, node: NodeId) -> impl Iterator<Item = &str> {
        self.nodes[node.0].keys().map(String::as_str)
    }

    fn read(&self, node: NodeId, seg: &Segment) -> Result<ComplexMatrix, Error> {
        let m = self.get(node, &seg.label).ok_or_else(|| Error::Schedule(format!("node {} has no block '{}'", node.0, seg.label)))?;
        if seg.start + seg.len > m.len() {
            return Err(Error::Schedule(format!(
                "segment {}..{} outside block '{}' of node {}",
                seg.start,
                seg.start + seg.len,
                seg.label,
                node.0
            )));
        }
        if seg.start == 0 && seg.len == m.len() {
            Ok(m.clone())
        } else {
            Ok(ComplexMatrix::row_vector(&m.as_slice()[seg.start..seg.start + seg.len]))
        }
    }

    fn write(&mut self, node: NodeId, seg: &Segment, data: ComplexMatrix, delivery: Delivery) -> Result<(), Error> {
        let slot = &mut self.nodes[node.0];
        match slot.get_mut(&seg.label) {
            None => {
                if seg.start != 0 {
                    return Err(Error::Schedule(format!("partial write into missing block '{}' at node {}", seg.label, node.0)));
                }
                slot.insert(seg.label.clone(), data);
            }
            Some(m) => {
                if seg.start + seg.len > m.len() {
                    return Err(Error::Schedule(format!("segment outside block '{}' of node {}", seg.label, node.0)));
                }
                let whole = seg.start == 0 && seg.len == m.len();
                if whole && delivery == Delivery::Store {
                    *m = data;
                } else {
                    let dst = &mut m.as_mut_slice()[seg.start..seg.start + seg.len];
                    for (d, s) in dst.iter_mut().zip(data.as_slice()) {
                        match delivery {
                            Delivery::Store => *d = *s,
                            Delivery::Accumulate => *d += *s,
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Execute `schedule` round by round. Every round reads from the state at its
/// start, so a node may send and receive the same label in one round.
///
/// Nodes erased at the schedule's stage cannot send (an error: their data is
/// gone) and silently drop whatever is sent to them; dropped transfers are not
/// ledgered.
pub fn execute(store: &mut NodeStore, schedule: &RoundSchedule, faults: &FaultScenario) -> Result<CostLedger, Error> {
    if let Err(v) = validate_one_port(schedule) {
        return Err(Error::Schedule(format!("one-port violation: {}", v[0])));
    }
    let erased = faults.erased_at(&schedule.stage);
    let mut ledger = CostLedger::new();
    for round in &schedule.rounds {
        let mut staged = Vec::new();
        let mut record = RoundRecord { stage: schedule.stage.clone(), transfers: Vec::new(), one_port_ok: true };
        for t in &round.transfers {
            if erased.contains(&t.src) {
                return Err(Error::Schedule(format!("node {} is erased at '{}' but must send", t.src.0, schedule.stage)));
            }
            if erased.contains(&t.dst) {
                continue;
            }
            for p in &t.pieces {
                staged.push((t.dst, p, store.read(t.src, &p.src)?));
            }
            record.transfers.push(TransferRecord { src: t.src.0, dst: t.dst.0, symbols: t.symbols() });
        }
        for (dst, p, data) in staged {
            store.write(dst, &p.dst, data, p.delivery)?;
        }
        ledger.push(record);
    }
    Ok(ledger)
}

pub fn run_schedule(mut store: NodeStore, schedule: &RoundSchedule, faults: &FaultScenario) -> Result<(NodeStore, CostLedger), Error> {
    let ledger = execute(&mut store, schedule, faults)?;
    Ok((store, ledger))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use num_complex::Complex64;

    fn t(src: usize, dst: usize, len: usize) -> Transfer {
        Transfer { src: NodeId(src), dst: NodeId(dst), pieces: vec![Piece::whole("m", len)] }
    }

    fn sched(rounds: Vec<Vec<Transfer>>) -> RoundSchedule {
        RoundSchedule { stage: "transpose".into(), rounds: rounds.into_iter().map(|transfers| Round { transfers }).collect() }
    }

    #[test]
    fn one_port_examples() {
        assert!(validate_one_port(&sched(vec![vec![t(0, 1, 1), t(2, 3, 1)]])).is_ok());
        let v = validate_one_port(&sched(vec![vec![t(0, 1, 1), t(0, 2, 1)]])).unwrap_err();
        assert_eq!(v, vec![Violation { round: 0, node: NodeId(0), kind: ViolationKind::TwoSends }]);
        let v = validate_one_port(&sched(vec![vec![], vec![t(1, 0, 1), t(2, 0, 1)]])).unwrap_err();
        assert_eq!(v, vec![Violation { round: 1, node: NodeId(0), kind: ViolationKind::TwoReceives }]);
        // duplex: sending and receiving in the same round is fine
        assert!(validate_one_port(&sched(vec![vec![t(0, 1, 1), t(1, 0, 1)]])).is_ok());
    }

    fn store_with(nodes: usize, vals: &[f64]) -> NodeStore {
        let mut s = NodeStore::new(nodes);
        for (i, &v) in vals.iter().enumerate() {
            s.insert(NodeId(i), "m", ComplexMatrix::from_fn(1, 10, |_, j| Complex64::new(v + j as f64, 0.0)));
        }
        s
    }

    #[test]
    fn run_ledgers() {
        let none = FaultScenario::default();
        let (_, l) = run_schedule(NodeStore::new(2), &RoundSchedule::new("x"), &none).unwrap();
        assert_eq!((l.c1(), l.c2()), (0, 0));
        let (s, l) = run_schedule(store_with(2, &[1.0]), &sched(vec![vec![t(0, 1, 10)]]), &none).unwrap();
        assert_eq!((l.c1(), l.c2()), (1, 10));
        assert_eq!(s.get(NodeId(1), "m"), s.get(NodeId(0), "m"));
        let mut two = sched(vec![vec![t(0, 1, 10)], vec![t(1, 2, 6)]]);
        two.rounds[1].transfers[0].pieces =
            vec![Piece { src: Segment::new("m", 0, 6), dst: Segment::new("m", 0, 6), delivery: Delivery::Store }];
        let (_, l) = run_schedule(store_with(3, &[1.0, 0.0, 0.0]), &two, &none).unwrap();
        assert_eq!(l.c2(), 16);
        assert_eq!(l, two.ledger());
    }

    #[test]
    fn swap_reads_round_start_state() {
        let s = store_with(2, &[0.0, 100.0]);
        let (out, _) = run_schedule(s.clone(), &sched(vec![vec![t(0, 1, 10), t(1, 0, 10)]]), &FaultScenario::default()).unwrap();
        assert_eq!(out.get(NodeId(0), "m"), s.get(NodeId(1), "m"));
        assert_eq!(out.get(NodeId(1), "m"), s.get(NodeId(0), "m"));
    }

    #[test]
    fn accumulate_adds() {
        let mut sc = sched(vec![vec![t(0, 1, 10)]]);
        sc.rounds[0].transfers[0].pieces[0].delivery = Delivery::Accumulate;
        let (out, _) = run_schedule(store_with(2, &[1.0, 2.0]), &sc, &FaultScenario::default()).unwrap();
        assert_eq!(out.get(NodeId(1), "m").unwrap().as_slice()[0], Complex64::new(3.0, 0.0));
    }

    #[test]
    fn erasures_drop_or_fail() {
        let sc = sched(vec![vec![t(0, 1, 10)]]);
        let f: FaultScenario = "transpose,1,erasure".parse().unwrap();
        let (out, l) = run_schedule(store_with(2, &[1.0, 2.0]), &sc, &f).unwrap();
        assert_eq!(l.c2(), 0);
        assert_eq!(out.get(NodeId(1), "m").unwrap().as_slice()[0], Complex64::new(2.0, 0.0));
        let f: FaultScenario = "transpose,0,erasure".parse().unwrap();
        assert!(run_schedule(store_with(2, &[1.0, 2.0]), &sc, &f).is_err());
    }

    #[test]
    fn relabel_and_overlay() {
        let a = sched(vec![vec![t(0, 1, 3)]]);
        let b = a.relabel(&[NodeId(4), NodeId(7)]);
        assert_eq!((b.rounds[0].transfers[0].src, b.rounds[0].transfers[0].dst), (NodeId(4), NodeId(7)));
        let c = a.clone().overlay(b);
        assert_eq!(c.rounds[0].transfers.len(), 2);
        assert_eq!(c.node_count(), 8);
    }
}
