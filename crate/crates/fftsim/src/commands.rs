//! `bounds`, `run` and `sweep`.

use std::fmt::Write as _;
use std::io;

use codedfft::cost::{
    all_to_all_bounds, crossover_check, crossover_threshold, encoding_cost, multi_broadcast_bounds, reduce_bounds, reduce_upper_time,
    transpose_cost, BoundKind, CostBound, CostParams, Regime,
};
use codedfft::matrix::rel_err;
use codedfft::mds::make_systematic_mds;
use codedfft::pipeline::{
    run_coded, run_coded_cost, run_uncoded, run_uncoded_cost, stage_cost_report, PipelineOptions, PipelineResult, RecoveryEvent,
};
use codedfft::sim::stages;
use codedfft::{random_input, DftPlan, FaultScenario};
use rayon::prelude::*;

use crate::config::{plan_for, ExperimentConfig};
use crate::oracle::reference_dft;

pub const UNCODED_TOL: f64 = 1e-10;
pub const CODED_TOL: f64 = 1e-8;

pub const CSV_HEADER: [&str; 18] = [
    "K",
    "P",
    "N",
    "alpha",
    "beta",
    "seed",
    "C1_rearrange",
    "C2_rearrange",
    "C1_transpose",
    "C2_transpose",
    "C1_encode2",
    "C2_encode2",
    "T_uncoded",
    "T_coded",
    "max_rel_err",
    "predicted_crossover",
    "measured_crossover",
    "recoverable",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub k: usize,
    pub p: usize,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub c1_rearrange: usize,
    pub c2_rearrange: usize,
    pub c1_transpose: usize,
    pub c2_transpose: usize,
    pub c1_encode2: usize,
    pub c2_encode2: usize,
    pub t_uncoded: f64,
    pub t_coded: f64,
    /// Empty in cost-only rows and when nothing could be checked.
    pub max_rel_err: Option<f64>,
    pub predicted_crossover: bool,
    pub measured_crossover: bool,
    pub recoverable: bool,
}

impl CsvRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.k.to_string(),
            self.p.to_string(),
            self.n.to_string(),
            self.alpha.to_string(),
            self.beta.to_string(),
            self.seed.to_string(),
            self.c1_rearrange.to_string(),
            self.c2_rearrange.to_string(),
            self.c1_transpose.to_string(),
            self.c2_transpose.to_string(),
            self.c1_encode2.to_string(),
            self.c2_encode2.to_string(),
            self.t_uncoded.to_string(),
            self.t_coded.to_string(),
            self.max_rel_err.map(|e| format!("{e:e}")).unwrap_or_default(),
            self.predicted_crossover.to_string(),
            self.measured_crossover.to_string(),
            self.recoverable.to_string(),
        ]
    }
}

/// Header plus one line per row.
pub fn write_csv<W: io::Write>(out: W, rows: &[CsvRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

fn kind_name(kind: BoundKind) -> &'static str {
    match kind {
        BoundKind::Lower => "lower",
        BoundKind::Upper => "upper",
        BoundKind::Exact => "exact",
    }
}

/// One line of the bound table. `value` is the α-β time for cost rows and
/// the scalar itself for threshold/predicate rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub primitive: String,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub kind: &'static str,
    pub value: f64,
}

impl BoundRow {
    fn cost(primitive: &str, b: CostBound, params: CostParams) -> Self {
        Self { primitive: primitive.into(), c1: Some(b.c1), c2: Some(b.c2), kind: kind_name(b.kind), value: b.time(params) }
    }

    fn scalar(primitive: &str, kind: &'static str, value: f64) -> Self {
        Self { primitive: primitive.into(), c1: None, c2: None, kind, value }
    }
}

fn params(cfg: &ExperimentConfig) -> Result<CostParams, codedfft::Error> {
    CostParams::new(cfg.alpha, cfg.beta)
}

/// Every closed-form bound for the configured sizes.
pub fn cmd_bounds(cfg: &ExperimentConfig) -> Result<Vec<BoundRow>, codedfft::Error> {
    let (k, p, n) = (cfg.k, cfg.p, cfg.n);
    let prm = params(cfg)?;
    if n % k != 0 {
        return Err(codedfft::Error::InvalidArgument(format!("K = {k} must divide N = {n}")));
    }
    let block = n / k;
    let a2a = match cfg.regime {
        Regime::MinRounds => "all-to-all-min-rounds",
        Regime::MinBandwidth => "all-to-all-min-bandwidth",
    };
    let red = reduce_bounds(k, block);
    let mut rows = vec![
        BoundRow::cost(a2a, all_to_all_bounds(k, block, cfg.regime), prm),
        BoundRow::cost("transpose", transpose_cost(k, n)?, prm),
        BoundRow::cost("reduce-lower", red.lower, prm),
        BoundRow::cost("reduce-envelope", red.envelope, prm),
        BoundRow::scalar("reduce-upper", "upper", reduce_upper_time(k, block, prm)),
    ];
    if p - k <= k {
        let (lo, hi) = multi_broadcast_bounds(k, p - k, block)?;
        rows.push(BoundRow::cost("multi-broadcast-lower", lo, prm));
        rows.push(BoundRow::cost("multi-broadcast-upper", hi, prm));
    }
    rows.push(BoundRow::cost("encode2-upper", encoding_cost(p, k, n)?, prm));
    rows.push(BoundRow::scalar("crossover-threshold", "threshold", crossover_threshold(k)));
    rows.push(BoundRow::scalar("crossover-predicted", "predicate", if crossover_check(p, k) { 1.0 } else { 0.0 }));
    Ok(rows)
}

pub fn write_bounds_csv<W: io::Write>(out: W, rows: &[BoundRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["primitive", "C1", "C2", "kind", "value"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([r.primitive.clone(), opt(r.c1), opt(r.c2), r.kind.to_string(), r.value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Unrecoverable,
    /// The pipeline claimed success but disagrees with the oracle.
    OracleMismatch,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::Unrecoverable => 2,
            RunStatus::OracleMismatch => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub row: CsvRow,
    pub report: String,
    pub coded: PipelineResult,
    pub uncoded: PipelineResult,
}

fn row_from(plan: &DftPlan, prm: CostParams, seed: u64, coded: &PipelineResult, t_uncoded: f64, err: Option<f64>) -> CsvRow {
    let st = |s: &str| coded.ledger.stage(s);
    let (re, tr, en) = (st(stages::REARRANGE), st(stages::TRANSPOSE), st(stages::ENCODE2));
    CsvRow {
        k: plan.k,
        p: plan.p,
        n: plan.n,
        alpha: prm.alpha,
        beta: prm.beta,
        seed,
        c1_rearrange: re.c1(),
        c2_rearrange: re.c2(),
        c1_transpose: tr.c1(),
        c2_transpose: tr.c2(),
        c1_encode2: en.c1(),
        c2_encode2: en.c2(),
        t_uncoded,
        t_coded: coded.ledger.time(prm),
        max_rel_err: err,
        predicted_crossover: crossover_check(plan.p, plan.k),
        measured_crossover: en.time(prm) < tr.time(prm),
        recoverable: coded.recoverable(),
    }
}

fn options(cfg: &ExperimentConfig, prm: CostParams) -> PipelineOptions {
    PipelineOptions { params: prm, segments: cfg.segments, ..PipelineOptions::default() }
}

/// Both pipelines on the seeded input. `T_uncoded` is the fault-free cost of
/// the uncoded algorithm, since an erasure just stops it.
pub fn cmd_run(cfg: &ExperimentConfig, faults: &FaultScenario) -> Result<RunOutcome, codedfft::Error> {
    let plan = cfg.plan()?;
    let prm = params(cfg)?;
    let x = random_input(plan.n, cfg.seed);
    let want = reference_dft(&x);
    let code = make_systematic_mds(plan.p, plan.k)?;

    let uncoded = run_uncoded(&x, &plan, &restrict(faults, plan.k))?;
    let coded = run_coded(&x, &plan, &code, &code, faults, &options(cfg, prm))?;
    let t_uncoded = run_uncoded_cost(&plan, &FaultScenario::none())?.ledger.time(prm);

    let err_u = uncoded.output.as_ref().map(|z| rel_err(z, &want));
    let err_c = coded.output.as_ref().map(|z| rel_err(z, &want));
    let mismatch = err_u.is_some_and(|e| e.is_nan() || e > UNCODED_TOL) || err_c.is_some_and(|e| e.is_nan() || e > CODED_TOL);
    let status = if mismatch {
        RunStatus::OracleMismatch
    } else if coded.output.is_none() {
        RunStatus::Unrecoverable
    } else {
        RunStatus::Ok
    };
    let err = match (err_u, err_c) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    };
    let row = row_from(&plan, prm, cfg.seed, &coded, t_uncoded, err);
    let report = report(&plan, prm, status, &row, &uncoded, &coded, err_u, err_c);
    Ok(RunOutcome { status, row, report, coded, uncoded })
}

/// The faults that name one of the first `nodes` nodes.
fn restrict(faults: &FaultScenario, nodes: usize) -> FaultScenario {
    FaultScenario { faults: faults.faults.iter().filter(|f| f.node.0 < nodes).cloned().collect() }
}

#[allow(clippy::too_many_arguments)]
fn report(
    plan: &DftPlan,
    prm: CostParams,
    status: RunStatus,
    row: &CsvRow,
    uncoded: &PipelineResult,
    coded: &PipelineResult,
    err_u: Option<f64>,
    err_c: Option<f64>,
) -> String {
    let mut s = String::new();
    let verdict = match status {
        RunStatus::Ok => "ok",
        RunStatus::Unrecoverable => "unrecoverable",
        RunStatus::OracleMismatch => "oracle-mismatch",
    };
    let err = |e: Option<f64>| e.map_or("n/a".to_string(), |e| format!("{e:e}"));
    let _ = writeln!(s, "status: {verdict}");
    let _ = writeln!(s, "plan: N={} N1={} N2={} K={} P={}", plan.n, plan.n1, plan.n2, plan.k, plan.p);
    let _ = writeln!(s, "cost: alpha={} beta={}", prm.alpha, prm.beta);
    let _ = writeln!(s, "uncoded: recoverable={} max_rel_err={}", uncoded.output.is_some(), err(err_u));
    let _ = writeln!(s, "coded: recoverable={} max_rel_err={} parity_used={}", coded.recoverable(), err(err_c), coded.used_parity());
    for st in stage_cost_report(coded, prm) {
        let _ = writeln!(s, "stage {}: C1={} C2={} time={}", st.stage, st.c1, st.c2, st.time);
    }
    let _ = writeln!(s, "T_uncoded: {}", row.t_uncoded);
    let _ = writeln!(s, "T_coded: {}", row.t_coded);
    let _ = writeln!(
        s,
        "crossover: threshold={} predicted={} measured={}",
        crossover_threshold(plan.k),
        row.predicted_crossover,
        row.measured_crossover
    );
    for ev in &coded.log {
        let ids = |v: &[codedfft::NodeId]| v.iter().map(|n| n.0.to_string()).collect::<Vec<_>>().join(" ");
        let _ = match ev {
            RecoveryEvent::Selected { stage, survivors, excluded } => {
                writeln!(s, "event {stage}: selected [{}] excluded [{}]", ids(survivors), ids(excluded))
            }
            RecoveryEvent::Decoded { stage, parity_used } => writeln!(s, "event {stage}: decoded parity_used={parity_used}"),
            RecoveryEvent::Unrecoverable { stage, reason } => writeln!(s, "event {stage}: unrecoverable ({reason})"),
        };
    }
    s
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub k: usize,
    pub p: usize,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
}

/// Grid in output order: K, then P−K, then α, then β.
pub fn sweep_grid(cfg: &ExperimentConfig) -> Vec<GridPoint> {
    let sw = &cfg.sweep;
    let ks = sw.k.clone().unwrap_or_else(|| vec![cfg.k]);
    let rs = sw.redundancy.clone().unwrap_or_else(|| vec![cfg.p.saturating_sub(cfg.k)]);
    let alphas = sw.alpha.clone().unwrap_or_else(|| vec![cfg.alpha]);
    let betas = sw.beta.clone().unwrap_or_else(|| vec![crate::config::BetaSpec::Value(cfg.beta)]);
    let mut grid = Vec::new();
    for &k in &ks {
        let n = sw.n.get(&k).copied().unwrap_or(cfg.n);
        for &r in &rs {
            for &alpha in &alphas {
                for b in &betas {
                    grid.push(GridPoint { k, p: k + r, n, alpha, beta: b.resolve(k) });
                }
            }
        }
    }
    grid
}

/// Evaluate one point: ledger-only unless `sweep.verify` is set.
pub fn sweep_point(cfg: &ExperimentConfig, pt: GridPoint, faults: &FaultScenario) -> Result<CsvRow, codedfft::Error> {
    let split = if pt.n == cfg.n { cfg.n1.zip(cfg.n2) } else { None };
    let plan = plan_for(pt.n, split, pt.k, pt.p)?;
    let prm = CostParams::new(pt.alpha, pt.beta)?;
    let opts = options(cfg, prm);
    let t_uncoded = run_uncoded_cost(&plan, &FaultScenario::none())?.ledger.time(prm);
    let (coded, err) = if cfg.sweep.verify {
        let x = random_input(plan.n, cfg.seed);
        let code = make_systematic_mds(plan.p, plan.k)?;
        let res = run_coded(&x, &plan, &code, &code, faults, &opts)?;
        let err = res.output.as_ref().map(|z| rel_err(z, &reference_dft(&x)));
        (res, err)
    } else {
        (run_coded_cost(&plan, faults, &opts)?, None)
    };
    Ok(row_from(&plan, prm, cfg.seed, &coded, t_uncoded, err))
}

/// Rows in grid order; invalid points are skipped with a warning. Points run
/// in parallel and share nothing.
pub fn cmd_sweep(cfg: &ExperimentConfig, faults: &FaultScenario) -> Vec<CsvRow> {
    let grid = sweep_grid(cfg);
    let rows: Vec<Option<CsvRow>> = grid
        .par_iter()
        .map(|&pt| match sweep_point(cfg, pt, faults) {
            Ok(row) => Some(row),
            Err(e) => {
                log::warn!("skipping K={} P={} N={}: {e}", pt.k, pt.p, pt.n);
                None
            }
        })
        .collect();
    rows.into_iter().flatten().collect()
}
