//! Multi-broadcast and multi-reduce.
//!
//! Both split the p nodes into groups of consecutive ranks and pair a
//! per-group pipelined broadcast/reduce with a recursive-doubling all-gather
//! among the nodes holding the same position in every group ("columns").

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::broadcast::{broadcast_external, broadcast_labeled, reduce_external, reduce_labeled};
use super::collectives::all_gather_labeled;
use super::{execute, FaultScenario, NodeId, NodeStore, RoundSchedule};
use crate::cost::{CostLedger, CostParams};
use crate::matrix::ComplexMatrix;
use crate::{ceil_log2, is_pow2, Error};

/// Divisor `s` of `n` with the smallest `cost(s)`; ties go to the smaller s.
pub fn tune_segments(n: usize, cost: impl Fn(usize) -> f64) -> usize {
    let mut best = (f64::INFINITY, 1);
    for s in (1..=n.max(1)).filter(|s| n.is_multiple_of(*s)) {
        let c = cost(s);
        if c < best.0 {
            best = (c, s);
        }
    }
    best.1
}

fn check_groups(p: usize, r: usize) -> Result<usize, Error> {
    if r == 0 || !p.is_multiple_of(r) {
        return Err(Error::InvalidArgument(format!("r = {r} must divide p = {p}")));
    }
    if !is_pow2(r) || !is_pow2(p / r) {
        return Err(Error::Unsupported(format!("p/r and r must be powers of two, got p = {p}, r = {r}")));
    }
    Ok(p / r)
}

fn column(g: usize, groups: usize, c: usize) -> Vec<NodeId> {
    (0..groups).map(|i| NodeId(i * g + c)).collect()
}

fn group(g: usize, i: usize) -> Vec<NodeId> {
    (i * g..(i + 1) * g).map(NodeId).collect()
}

/// Rank `i·(p/r)` broadcasts its `n`-symbol block `mb/i`; afterwards every
/// rank holds `mb/0 .. mb/(r−1)`. Receivers must hold zeroed `mb/i` buffers
/// for their own group before the broadcast stage.
pub fn multi_broadcast(p: usize, r: usize, n: usize, s: usize) -> Result<RoundSchedule, Error> {
    let g = check_groups(p, r)?;
    let mut bcast = RoundSchedule::new("multi-broadcast");
    for i in 0..r {
        bcast = bcast.overlay(broadcast_labeled(g, n, s, &format!("mb/{i}"))?.relabel(&group(g, i)));
    }
    let mut gather = RoundSchedule::new("multi-broadcast");
    let ag = all_gather_labeled(r, n, "mb/")?;
    for c in 0..g {
        gather = gather.overlay(ag.relabel(&column(g, r, c)));
    }
    Ok(bcast.then(gather).with_stage("multi-broadcast"))
}

/// Multi-broadcast with the senders outside the destination set: sender i is
/// rank `p + i` and feeds group i (ranks `i·(p/r) ..`), then the groups
/// all-gather along columns. Every destination receives all `r·n` symbols.
/// Destinations need zeroed `mb/i` buffers for their own group.
pub fn multi_broadcast_external(p: usize, r: usize, n: usize, s: usize) -> Result<RoundSchedule, Error> {
    let g = check_groups(p, r)?;
    let mut bcast = RoundSchedule::new("multi-broadcast");
    for i in 0..r {
        let mut members = group(g, i);
        members.push(NodeId(p + i));
        bcast = bcast.overlay(broadcast_external(g, n, s, &format!("mb/{i}"))?.relabel(&members));
    }
    let mut gather = RoundSchedule::new("multi-broadcast");
    let ag = all_gather_labeled(r, n, "mb/")?;
    for c in 0..g {
        gather = gather.overlay(ag.relabel(&column(g, r, c)));
    }
    Ok(bcast.then(gather).with_stage("multi-broadcast"))
}

/// Multi-reduce to internal roots: reduction node i is rank `i·(p/r)` and
/// ends with `Σ_j a[i][j]·M_j`.
#[derive(Clone, Debug)]
pub struct MultiReduce {
    pub p: usize,
    pub r: usize,
    pub n: usize,
    pub gather: RoundSchedule,
    pub reduce: RoundSchedule,
}

pub fn multi_reduce(p: usize, r: usize, n: usize, s: usize) -> Result<MultiReduce, Error> {
    let g = check_groups(p, r)?;
    let mut gather = RoundSchedule::new("multi-reduce");
    let ag = all_gather_labeled(r, n, "mr/")?;
    for c in 0..g {
        gather = gather.overlay(ag.relabel(&column(g, r, c)));
    }
    let mut reduce = RoundSchedule::new("multi-reduce");
    let red = reduce_labeled(g, n, s, "red")?;
    for i in 0..r {
        reduce = reduce.overlay(red.relabel(&group(g, i)));
    }
    Ok(MultiReduce { p, r, n, gather, reduce })
}

impl MultiReduce {
    pub fn schedule(&self) -> RoundSchedule {
        self.gather.clone().then(self.reduce.clone()).with_stage("multi-reduce")
    }

    pub fn roots(&self) -> Vec<NodeId> {
        (0..self.r).map(|i| NodeId(i * (self.p / self.r))).collect()
    }

    /// Run on fresh stores: `messages[j]` starts at rank j, `coeffs` is r×p.
    /// Returns the r reductions and the ledger.
    pub fn run(&self, messages: &[ComplexMatrix], coeffs: &ComplexMatrix) -> Result<(Vec<ComplexMatrix>, CostLedger), Error> {
        let (p, r) = (self.p, self.r);
        let g = p / r;
        if messages.len() != p || coeffs.shape() != (r, p) {
            return Err(Error::InvalidArgument(format!("need {p} messages and an {r}×{p} coefficient matrix")));
        }
        let shape = messages[0].shape();
        let mut store = NodeStore::new(p);
        for (j, m) in messages.iter().enumerate() {
            if m.len() != self.n {
                return Err(Error::Shape { expected: (1, self.n), found: m.shape() });
            }
            store.insert(NodeId(j), format!("mr/{}", j / g), m.clone());
        }
        let mut ledger = execute(&mut store, &self.gather, &FaultScenario::none())?;
        for j in 0..p {
            let (i, c) = (j / g, j % g);
            let mut part = ComplexMatrix::zeros(shape.0, shape.1);
            for i2 in 0..r {
                let m = store.get(NodeId(j), &format!("mr/{i2}")).expect("gathered");
                part.axpy(coeffs[(i, i2 * g + c)], m)?;
            }
            store.insert(NodeId(j), "red", part);
        }
        ledger.extend(execute(&mut store, &self.reduce, &FaultScenario::none())?);
        let out = self.roots().into_iter().map(|id| store.get(id, "red").expect("root keeps its sum").clone()).collect();
        Ok((out, ledger))
    }
}

/// Multi-reduce from `k` source ranks to `r` outside targets, as used for the
/// parity encoding: target j ends with `Σ_ρ coeff[ρ][j]·M_ρ`.
///
/// The sources form `groups` groups of `k/groups` consecutive ranks; target j
/// is served by group `j mod groups`, so each group serves up to
/// `m = ⌈r/groups⌉` targets. Stage 1 all-gathers the raw blocks along
/// columns (`log₂groups` rounds, `(groups−1)·n` symbols); stage 2 forms the
/// partial sums locally and pipelines them out of each group in
/// `log₂(k/groups) + m·s` rounds of `n/s` symbols.
#[derive(Clone, Debug)]
pub struct ExternalReduce {
    pub k: usize,
    pub r: usize,
    pub n: usize,
    pub groups: usize,
    pub segments: usize,
    pub gather: RoundSchedule,
    /// Ranks `0..k` are the sources, `k..k+r` the targets.
    pub reduce: RoundSchedule,
}

impl ExternalReduce {
    pub fn new(k: usize, r: usize, n: usize, groups: usize, segments: usize) -> Result<Self, Error> {
        if !is_pow2(k) || !is_pow2(groups) || groups > k || r == 0 {
            return Err(Error::Unsupported(format!(
                "external reduce needs power-of-two k ≥ groups and r ≥ 1 (k = {k}, groups = {groups}, r = {r})"
            )));
        }
        let h = k / groups;
        let mut gather = RoundSchedule::new("multi-reduce");
        let ag = all_gather_labeled(groups, n, "enc/")?;
        for c in 0..h {
            gather = gather.overlay(ag.relabel(&column(h, groups, c)));
        }
        let mut reduce = RoundSchedule::new("multi-reduce");
        for a in 0..groups {
            let targets: Vec<NodeId> = (a..r).step_by(groups).map(|j| NodeId(k + j)).collect();
            if targets.is_empty() {
                continue;
            }
            let sched = reduce_external(h, targets.len(), n, segments, "part", "out")?;
            let mut members = group(h, a);
            members.extend(targets);
            reduce = reduce.overlay(sched.relabel(&members));
        }
        Ok(Self { k, r, n, groups, segments, gather, reduce })
    }

    /// Closed-form time of [`ExternalReduce::new`]'s schedule.
    pub fn predicted_time(k: usize, r: usize, n: usize, groups: usize, s: usize, params: CostParams) -> f64 {
        let lg = ceil_log2(groups) as f64;
        let m = r.div_ceil(groups);
        let rounds = (ceil_log2(k / groups) as usize + m * s) as f64;
        lg * params.alpha + ((groups - 1) * n) as f64 * params.beta + rounds * (params.alpha + (n / s) as f64 * params.beta)
    }

    /// Choose the group count and segment count minimising the predicted time.
    pub fn tuned(k: usize, r: usize, n: usize, params: CostParams) -> Result<Self, Error> {
        let mut best: Option<(f64, usize, usize)> = None;
        let mut groups = 1;
        while groups <= k && groups <= r.next_power_of_two() {
            let s = tune_segments(n, |s| Self::predicted_time(k, r, n, groups, s, params));
            let t = Self::predicted_time(k, r, n, groups, s, params);
            if best.is_none_or(|b| t < b.0) {
                best = Some((t, groups, s));
            }
            groups *= 2;
        }
        let (_, groups, s) = best.expect("groups = 1 always considered");
        Self::new(k, r, n, groups, s)
    }

    pub fn schedule(&self) -> RoundSchedule {
        self.gather.clone().then(self.reduce.clone()).with_stage("multi-reduce")
    }

    /// Run on `store`. Every node of `sources` holds an `n`-symbol block
    /// under `input`; `coeff[ρ][j]` (k×r) weights source ρ for target j.
    /// Target j ends with the combination under `output`, shaped like the
    /// inputs. Stages are ledgered under `stage`.
    #[allow(clippy::too_many_arguments)]
    pub fn execute(
        &self,
        store: &mut NodeStore,
        sources: &[NodeId],
        targets: &[NodeId],
        input: &str,
        coeff: &ComplexMatrix,
        output: &str,
        stage: &str,
        faults: &FaultScenario,
    ) -> Result<CostLedger, Error> {
        let (k, r, h) = (self.k, self.r, self.k / self.groups);
        if sources.len() != k || targets.len() != r || coeff.shape() != (k, r) {
            return Err(Error::InvalidArgument(format!(
                "external reduce expects {k} sources, {r} targets and a {k}×{r} coefficient matrix"
            )));
        }
        let shape =
            store.get(sources[0], input).ok_or_else(|| Error::Schedule(format!("source {} lacks '{input}'", sources[0].0)))?.shape();
        for (rho, &id) in sources.iter().enumerate() {
            let m = store.get(id, input).ok_or_else(|| Error::Schedule(format!("source {} lacks '{input}'", id.0)))?.clone();
            if m.len() != self.n {
                return Err(Error::Shape { expected: (1, self.n), found: m.shape() });
            }
            store.insert(id, format!("enc/{}", rho / h), m);
        }
        let mut ledger = execute(store, &self.gather.relabel(sources).with_stage(stage), faults)?;
        for (rho, &id) in sources.iter().enumerate() {
            let (a, c) = (rho / h, rho % h);
            let mine: Vec<usize> = (a..r).step_by(self.groups).collect();
            let mut part = Vec::with_capacity(mine.len() * self.n);
            for &j in &mine {
                let mut acc = ComplexMatrix::zeros(shape.0, shape.1);
                for a2 in 0..self.groups {
                    let m = store.get(id, &format!("enc/{a2}")).expect("gathered");
                    acc.axpy(coeff[(a2 * h + c, j)], m)?;
                }
                part.extend_from_slice(acc.as_slice());
            }
            store.insert(id, "part", ComplexMatrix::row_vector(&part));
        }
        for &t in targets {
            store.insert(t, "out", ComplexMatrix::zeros(1, self.n));
        }
        let mut members = sources.to_vec();
        members.extend_from_slice(targets);
        ledger.extend(execute(store, &self.reduce.relabel(&members).with_stage(stage), faults)?);
        for &t in targets {
            let out = store.remove(t, "out").expect("allocated above").into_vec();
            store.insert(t, String::from(output), ComplexMatrix::from_vec(shape.0, shape.1, out)?);
        }
        for &id in sources {
            store.remove(id, "part");
            for a in 0..self.groups {
                store.remove(id, &format!("enc/{a}"));
            }
        }
        Ok(ledger)
    }
}

/// `Σ_j coeff(j)·messages[j]`, the direct oracle for reductions.
pub fn weighted_sum(messages: &[ComplexMatrix], coeff: impl Fn(usize) -> Complex64) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(messages[0].rows(), messages[0].cols());
    for (j, m) in messages.iter().enumerate() {
        acc.axpy(coeff(j), m).expect("equal shapes");
    }
    acc
}
