//! All-to-all and all-gather schedules.
//!
//! All-to-all uses a slot layout shared by both algorithms: node `o` keeps the
//! block it owes node `d` under `a2a/k` with `k = (d − o) mod p`. Every move
//! keeps the slot index, and at the end node `i` finds the block from origin
//! `(i − k) mod p` in slot `k`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{NodeId, NodeStore, Piece, Round, RoundSchedule, Transfer};
use crate::matrix::ComplexMatrix;
use crate::{ceil_log2, is_pow2, Error};

pub const A2A_PREFIX: &str = "a2a/";

fn slot(k: usize) -> String {
    format!("{A2A_PREFIX}{k}")
}

/// Index-rotation Bruck all-to-all with `n/p` symbols per block.
///
/// Works for any p in ⌈log₂p⌉ rounds; for a power of two every round moves
/// p/2 blocks, so the ledger is `(log₂p, (n/2)·log₂p)`.
pub fn all_to_all_bruck(p: usize, n: usize) -> Result<RoundSchedule, Error> {
    if p == 0 || !n.is_multiple_of(p) {
        return Err(Error::InvalidArgument(format!("all-to-all needs p ≥ 1 dividing n, got p = {p}, n = {n}")));
    }
    Ok(bruck_sized(p, |_, _| n / p))
}

/// Bruck with per-block sizes `size(origin, dest)`; empty blocks are never sent.
pub fn bruck_sized(p: usize, size: impl Fn(usize, usize) -> usize) -> RoundSchedule {
    let mut sched = RoundSchedule::new("all-to-all");
    for j in 0..ceil_log2(p) {
        let bit = 1usize << j;
        let mut round = Round::default();
        for i in 0..p {
            let pieces: Vec<Piece> = (1..p)
                .filter(|k| k & bit != 0)
                .filter_map(|k| {
                    let origin = (i + p - (k % bit)) % p;
                    let len = size(origin, (origin + k) % p);
                    (len > 0).then(|| Piece::whole(slot(k), len))
                })
                .collect();
            if !pieces.is_empty() {
                round.transfers.push(Transfer { src: NodeId(i), dst: NodeId((i + bit) % p), pieces });
            }
        }
        sched.rounds.push(round);
    }
    sched
}

/// Direct exchange in p−1 rounds: in round k node i sends to i+k.
pub fn all_to_all_pairwise(p: usize, n: usize) -> Result<RoundSchedule, Error> {
    if p == 0 || !n.is_multiple_of(p) {
        return Err(Error::InvalidArgument(format!("all-to-all needs p ≥ 1 dividing n, got p = {p}, n = {n}")));
    }
    let mut sched = RoundSchedule::new("all-to-all");
    for k in 1..p {
        let transfers = (0..p)
            .map(|i| Transfer { src: NodeId(i), dst: NodeId((i + k) % p), pieces: alloc::vec![Piece::whole(slot(k), n / p)] })
            .collect();
        sched.rounds.push(Round { transfers });
    }
    Ok(sched)
}

/// Place `blocks[o][d]` (origin rank o, destination rank d) into the slot
/// layout on `members`.
pub fn all_to_all_load(store: &mut NodeStore, members: &[NodeId], blocks: Vec<Vec<Option<ComplexMatrix>>>) {
    let p = members.len();
    for (o, row) in blocks.into_iter().enumerate() {
        for (d, b) in row.into_iter().enumerate() {
            if let Some(b) = b {
                store.insert(members[o], slot((d + p - o) % p), b);
            }
        }
    }
}

/// Take the delivered blocks out of the slot layout: result `[d][o]` is the
/// block node d received from origin o, if `present(o, d)`.
pub fn all_to_all_collect(
    store: &mut NodeStore,
    members: &[NodeId],
    present: impl Fn(usize, usize) -> bool,
) -> Result<Vec<Vec<Option<ComplexMatrix>>>, Error> {
    let p = members.len();
    let mut out = Vec::with_capacity(p);
    for (d, &node) in members.iter().enumerate() {
        let mut row = alloc::vec![None; p];
        for (o, cell) in row.iter_mut().enumerate() {
            if present(o, d) {
                let k = (d + p - o) % p;
                let b = store
                    .get(node, &slot(k))
                    .ok_or_else(|| Error::Schedule(format!("node {} missing all-to-all block from rank {o}", node.0)))?;
                *cell = Some(b.clone());
            }
        }
        out.push(row);
    }
    for &node in members {
        let labels: Vec<String> = store.labels(node).filter(|l| l.starts_with(A2A_PREFIX)).map(String::from).collect();
        for l in labels {
            store.remove(node, &l);
        }
    }
    Ok(out)
}

/// Recursive-doubling all-gather; node i's message lives under `ag/i`.
pub fn all_gather_rd(r: usize, n: usize) -> Result<RoundSchedule, Error> {
    all_gather_labeled(r, n, "ag/")
}

pub(crate) fn all_gather_labeled(r: usize, n: usize, prefix: &str) -> Result<RoundSchedule, Error> {
    if !is_pow2(r) {
        return Err(Error::Unsupported(format!("recursive doubling needs a power-of-two group, got {r}")));
    }
    let mut sched = RoundSchedule::new("all-gather");
    for j in 0..ceil_log2(r) {
        let bit = 1usize << j;
        let transfers = (0..r)
            .map(|i| {
                let base = i & !(bit - 1);
                let pieces = (base..base + bit).map(|o| Piece::whole(format!("{prefix}{o}"), n)).collect();
                Transfer { src: NodeId(i), dst: NodeId(i ^ bit), pieces }
            })
            .collect();
        sched.rounds.push(Round { transfers });
    }
    Ok(sched)
}
