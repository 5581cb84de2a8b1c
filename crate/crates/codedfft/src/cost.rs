//! α-β cost model: closed-form bounds and the ledger measured from schedules.
//!
//! A round costs `α + b·β`, where `b` is the largest transfer of that round, so
//! a schedule costs `C1·α + C2·β` with `C1` the round count and `C2` the sum of
//! per-round maxima.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use crate::{ceil_log2, Error};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostParams {
    pub alpha: f64,
    pub beta: f64,
}

impl CostParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, Error> {
        if !(alpha >= 0.0 && beta >= 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("alpha and beta must be finite and ≥ 0, got {alpha}, {beta}")));
        }
        Ok(Self { alpha, beta })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransferRecord {
    pub src: usize,
    pub dst: usize,
    pub symbols: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundRecord {
    pub stage: String,
    pub transfers: Vec<TransferRecord>,
    pub one_port_ok: bool,
}

impl RoundRecord {
    /// Largest transfer of the round (bᵢ).
    pub fn max_symbols(&self) -> usize {
        self.transfers.iter().map(|t| t.symbols).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CostLedger {
    pub rounds: Vec<RoundRecord>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, round: RoundRecord) {
        self.rounds.push(round);
    }

    pub fn extend(&mut self, other: CostLedger) {
        self.rounds.extend(other.rounds);
    }

    pub fn c1(&self) -> usize {
        self.rounds.len()
    }

    pub fn c2(&self) -> usize {
        self.rounds.iter().map(RoundRecord::max_symbols).sum()
    }

    /// Sum of every transfer's size; diagnostic only, not part of the cost.
    pub fn total_volume(&self) -> usize {
        self.rounds.iter().flat_map(|r| &r.transfers).map(|t| t.symbols).sum()
    }

    pub fn one_port_ok(&self) -> bool {
        self.rounds.iter().all(|r| r.one_port_ok)
    }

    pub fn time(&self, params: CostParams) -> f64 {
        total_time(self, params)
    }

    /// The sub-ledger of rounds tagged `stage`.
    pub fn stage(&self, stage: &str) -> CostLedger {
        CostLedger { rounds: self.rounds.iter().filter(|r| r.stage == stage).cloned().collect() }
    }

    /// Stage labels in first-appearance order.
    pub fn stages(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rounds {
            if !out.contains(&r.stage) {
                out.push(r.stage.clone());
            }
        }
        out
    }
}

pub fn total_time(ledger: &CostLedger, params: CostParams) -> f64 {
    ledger.c1() as f64 * params.alpha + ledger.c2() as f64 * params.beta
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    Lower,
    Upper,
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostBound {
    pub c1: f64,
    pub c2: f64,
    pub kind: BoundKind,
}

impl CostBound {
    pub fn new(c1: f64, c2: f64, kind: BoundKind) -> Self {
        Self { c1, c2, kind }
    }

    pub fn time(&self, params: CostParams) -> f64 {
        self.c1 * params.alpha + self.c2 * params.beta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    MinRounds,
    MinBandwidth,
}

fn log2(x: usize) -> f64 {
    Float::log2(x as f64)
}

fn clog(x: usize) -> f64 {
    ceil_log2(x) as f64
}

/// Achievable all-to-all costs: `(⌈log₂p⌉, (n/2)·log₂p)` in the round-optimal
/// regime, `(p−1, (p−1)n/p)` in the bandwidth-optimal one.
pub fn all_to_all_bounds(p: usize, n: usize, regime: Regime) -> CostBound {
    if p <= 1 {
        return CostBound::new(0.0, 0.0, BoundKind::Exact);
    }
    let n = n as f64;
    match regime {
        Regime::MinRounds => CostBound::new(clog(p), n / 2.0 * log2(p), BoundKind::Exact),
        Regime::MinBandwidth => CostBound::new((p - 1) as f64, (p - 1) as f64 * n / p as f64, BoundKind::Exact),
    }
}

/// One transpose of N symbols over K nodes: `(⌈log₂K⌉, N/(2K)·⌈log₂K⌉)`.
pub fn transpose_cost(k: usize, n: usize) -> Result<CostBound, Error> {
    if k == 0 || !n.is_multiple_of(k) {
        return Err(Error::InvalidArgument(format!("K = {k} must divide N = {n}")));
    }
    let l = clog(k);
    Ok(CostBound::new(l, (n / k) as f64 / 2.0 * l, BoundKind::Exact))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReduceBounds {
    /// `(⌈log₂p⌉, n)`.
    pub lower: CostBound,
    /// Parameter-free envelope `(2⌈log₂p⌉, 2n)` of the squared-sum upper bound.
    pub envelope: CostBound,
}

pub fn reduce_bounds(p: usize, n: usize) -> ReduceBounds {
    if p <= 1 {
        let z = CostBound::new(0.0, 0.0, BoundKind::Exact);
        return ReduceBounds { lower: z, envelope: z };
    }
    let l = clog(p);
    ReduceBounds {
        lower: CostBound::new(l, n as f64, BoundKind::Lower),
        envelope: CostBound::new(2.0 * l, 2.0 * n as f64, BoundKind::Upper),
    }
}

/// `(√(⌈log₂p⌉α) + √(nβ))²`.
pub fn reduce_upper_time(p: usize, n: usize, params: CostParams) -> f64 {
    if p <= 1 {
        return 0.0;
    }
    let s = Float::sqrt(clog(p) * params.alpha) + Float::sqrt(n as f64 * params.beta);
    s * s
}

/// Lower `(⌈log₂p⌉, rn)` and upper `(2⌈log₂p⌉, 2rn)`.
pub fn multi_broadcast_bounds(p: usize, r: usize, n: usize) -> Result<(CostBound, CostBound), Error> {
    if r == 0 || r > p {
        return Err(Error::InvalidArgument(format!("need 1 ≤ r ≤ p, got r = {r}, p = {p}")));
    }
    let (l, v) = (clog(p), (r * n) as f64);
    Ok((CostBound::new(l, v, BoundKind::Lower), CostBound::new(2.0 * l, 2.0 * v, BoundKind::Upper)))
}

/// Parity encoding of the second stage: `(2⌈log₂K⌉, 2(P−K)N/K)`.
pub fn encoding_cost(p: usize, k: usize, n: usize) -> Result<CostBound, Error> {
    if k == 0 || k >= p {
        return Err(Error::InvalidArgument(format!("need 1 ≤ K < P, got K = {k}, P = {p}")));
    }
    if !n.is_multiple_of(k) {
        return Err(Error::InvalidArgument(format!("K = {k} must divide N = {n}")));
    }
    Ok(CostBound::new(2.0 * clog(k), 2.0 * ((p - k) * (n / k)) as f64, BoundKind::Upper))
}

/// Whether the redundancy is small enough for coding to be cheaper than a
/// transpose: `P−K < log₂K / 2`, strictly.
pub fn crossover_check(p: usize, k: usize) -> bool {
    assert!(k < p, "crossover_check needs K < P");
    ((p - k) as f64) < log2(k) / 2.0
}

/// `log₂K / 2`.
pub fn crossover_threshold(k: usize) -> f64 {
    log2(k) / 2.0
}
