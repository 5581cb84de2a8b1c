//! Pipelined broadcast and its reversal, reduce.
//!
//! The message is cut into blocks that flow through a hypercube of 2^q nodes
//! from a source attached to node 0. In round t the source hands block t to
//! node 0, and every pair of nodes across dimension `t mod q` exchanges: each
//! side sends the highest-numbered block its partner lacks (node 0 does not
//! take anything from its partner while the source is still feeding it). All
//! 2^q nodes hold all B blocks after q + B rounds.
//!
//! If the source *is* node 0 (internal root), round 0 carries nothing and the
//! broadcast takes q + B − 1 rounds. A reduce is the same plan run backwards:
//! every node sends each block exactly once, after all contributions to that
//! block have reached it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{Delivery, NodeId, Piece, Round, RoundSchedule, Segment, Transfer};
use crate::{ceil_log2, is_pow2, Error};

/// Block-level schedule: per round, `(src, dst, block)` triples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPlan {
    pub blocks: usize,
    pub rounds: Vec<Vec<(usize, usize, usize)>>,
}

impl BlockPlan {
    /// Reverse the plan: rounds in opposite order, every edge flipped.
    pub fn reversed(&self) -> Self {
        let rounds = self.rounds.iter().rev().map(|r| r.iter().map(|&(s, d, b)| (d, s, b)).collect()).collect();
        Self { blocks: self.blocks, rounds }
    }
}

/// Binomial pipeline on the hypercube `0..2^q`. With `source = Some(f)`,
/// block t enters node 0 from external rank `f(t)`; with `None`, node 0 owns
/// every block and releases block t at round t (leading empty rounds dropped).
pub fn binomial_plan(q: u32, blocks: usize, source: Option<&dyn Fn(usize) -> usize>) -> BlockPlan {
    let h = 1usize << q;
    let mut have = vec![vec![false; blocks]; h];
    let mut missing = (h - 1) * blocks + if source.is_some() { blocks } else { 0 };
    let mut rounds = Vec::new();
    let mut t = 0;
    while missing > 0 {
        let mut round = Vec::new();
        let mut arrivals = Vec::new();
        if t < blocks {
            match source {
                Some(f) => {
                    round.push((f(t), 0, t));
                    arrivals.push((0, t));
                }
                None => have[0][t] = true,
            }
        }
        if q > 0 {
            let dim = 1usize << (t % q as usize);
            for x in 0..h {
                let y = x ^ dim;
                if y == 0 && t < blocks {
                    continue;
                }
                let owned = if x == 0 && source.is_none() && t < blocks { t } else { blocks };
                // with the source merged into node 0, block t only becomes sendable next round
                if let Some(b) = (0..owned).rev().find(|&b| have[x][b] && !have[y][b]) {
                    round.push((x, y, b));
                    arrivals.push((y, b));
                }
            }
        }
        for (y, b) in arrivals {
            debug_assert!(!have[y][b]);
            have[y][b] = true;
            missing -= 1;
        }
        if !round.is_empty() || !rounds.is_empty() {
            rounds.push(round);
        }
        t += 1;
        assert!(t <= 4 * (q as usize + blocks) + 4, "binomial pipeline failed to converge");
    }
    BlockPlan { blocks, rounds }
}

/// Rounds taken by [`broadcast_pipelined`]: `⌈log₂p⌉ + s − 1` (0 for p = 1).
pub fn broadcast_rounds(p: usize, s: usize) -> usize {
    if p <= 1 {
        0
    } else {
        ceil_log2(p) as usize + s - 1
    }
}

fn check(p: usize, n: usize, s: usize) -> Result<(), Error> {
    if !is_pow2(p) {
        return Err(Error::Unsupported(format!("pipelined broadcast needs a power-of-two node count, got {p}")));
    }
    if s == 0 || !n.is_multiple_of(s) {
        return Err(Error::InvalidArgument(format!("segment count {s} must be ≥ 1 and divide n = {n}")));
    }
    Ok(())
}

fn to_schedule(plan: &BlockPlan, stage: &str, seg: usize, place: impl Fn(usize, usize, usize) -> Piece) -> RoundSchedule {
    let mut sched = RoundSchedule::new(stage);
    for r in &plan.rounds {
        let mut round = Round::default();
        for &(src, dst, b) in r {
            if seg > 0 {
                round.transfers.push(Transfer { src: NodeId(src), dst: NodeId(dst), pieces: vec![place(src, dst, b)] });
            }
        }
        sched.rounds.push(round);
    }
    sched
}

/// Broadcast of the `n`-symbol block `bc` from rank 0, in `s` segments.
/// Receivers must already hold an `n`-symbol `bc` buffer.
pub fn broadcast_pipelined(p: usize, n: usize, s: usize) -> Result<RoundSchedule, Error> {
    broadcast_labeled(p, n, s, "bc")
}

pub(crate) fn broadcast_labeled(p: usize, n: usize, s: usize, label: &str) -> Result<RoundSchedule, Error> {
    check(p, n, s)?;
    let seg = n / s;
    let plan = binomial_plan(ceil_log2(p), s, None);
    Ok(to_schedule(&plan, "broadcast", seg, |_, _, b| Piece {
        src: Segment::new(label, b * seg, seg),
        dst: Segment::new(label, b * seg, seg),
        delivery: Delivery::Store,
    }))
}

/// Broadcast from an outside source, rank `h`, into the group `0..h` (a power
/// of two): `log₂h + s` rounds. Group ranks need an `n`-symbol `label` buffer.
pub fn broadcast_external(h: usize, n: usize, s: usize, label: &str) -> Result<RoundSchedule, Error> {
    check(h, n, s)?;
    let seg = n / s;
    let plan = binomial_plan(ceil_log2(h), s, Some(&|_| h));
    Ok(to_schedule(&plan, "broadcast", seg, |_, _, b| Piece {
        src: Segment::new(label, b * seg, seg),
        dst: Segment::new(label, b * seg, seg),
        delivery: Delivery::Store,
    }))
}

/// Reduce to rank 0: every rank holds its (already weighted) contribution
/// under `red`; rank 0 ends with the sum. Same ledger as the broadcast.
pub fn reduce_reversed(p: usize, n: usize, s: usize) -> Result<RoundSchedule, Error> {
    reduce_labeled(p, n, s, "red")
}

pub(crate) fn reduce_labeled(p: usize, n: usize, s: usize, label: &str) -> Result<RoundSchedule, Error> {
    check(p, n, s)?;
    let seg = n / s;
    let plan = binomial_plan(ceil_log2(p), s, None).reversed();
    Ok(to_schedule(&plan, "reduce", seg, |_, _, b| Piece {
        src: Segment::new(label, b * seg, seg),
        dst: Segment::new(label, b * seg, seg),
        delivery: Delivery::Accumulate,
    }))
}

/// Reduce from a group of `h` ranks (a power of two) to `m` outside targets,
/// ranks `h..h+m`. Each group rank holds `m·n` symbols under `src_label`:
/// its partial for target j at `j·n..(j+1)·n`. Target j receives the group
/// sum of its part into its `n`-symbol `dst_label` buffer.
///
/// Takes `log₂h + m·s` rounds of `n/s` symbols each.
pub fn reduce_external(h: usize, m: usize, n: usize, s: usize, src_label: &str, dst_label: &str) -> Result<RoundSchedule, Error> {
    check(h, n, s)?;
    if m == 0 {
        return Ok(RoundSchedule::new("reduce"));
    }
    let seg = n / s;
    let target = |b: usize| h + b / s;
    let plan = binomial_plan(ceil_log2(h), m * s, Some(&target)).reversed();
    Ok(to_schedule(&plan, "reduce", seg, |_, dst, b| {
        if dst >= h {
            Piece {
                src: Segment::new(src_label, b * seg, seg),
                dst: Segment::new(dst_label, (b % s) * seg, seg),
                delivery: Delivery::Store,
            }
        } else {
            Piece { src: Segment::new(src_label, b * seg, seg), dst: Segment::new(src_label, b * seg, seg), delivery: Delivery::Accumulate }
        }
    }))
}

/// Segment count minimising `(L + s − 1)(α + nβ/s)` over divisors of `n`.
pub fn reduce_segments_auto(p: usize, n: usize, params: crate::CostParams) -> usize {
    super::tune_segments(n, |s| {
        let rounds = broadcast_rounds(p, s) as f64;
        rounds * params.alpha + rounds * (n / s) as f64 * params.beta
    })
}
