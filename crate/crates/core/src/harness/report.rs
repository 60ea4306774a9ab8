//! Run configuration, oracle verification, and the metrics report.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::oracle::{self, Workload};
use crate::trace::{EventKind, TraceEvent};
use crate::txn::SchedulerMode;

use super::driver::{run_deterministic, run_threaded, RunOutcome};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: SchedulerMode,
    pub seed: u64,
    /// 0 = deterministic seeded interleaving; >= 1 = that many OS worker
    /// threads through the blocking engine.
    pub workers: usize,
    pub iterations: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: SchedulerMode::DynamicAv,
            seed: 0,
            workers: 0,
            iterations: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verdict {
    Pass,
    Skipped,
    Fail,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Skipped => "skipped",
            Verdict::Fail => "fail",
        }
    }
}

/// Aggregate counters for a run; printed as `key: value` lines or JSON.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MetricsReport {
    pub mode: String,
    pub iterations: u32,
    pub transactions: u64,
    pub committed: u64,
    pub rejected: u64,
    pub block_events: u64,
    pub early_releases: u64,
    pub mean_queue_wait: f64,
    pub max_queue_wait: u64,
    pub conflict_edges: u64,
    pub verification: String,
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode: {}", self.mode)?;
        writeln!(f, "iterations: {}", self.iterations)?;
        writeln!(f, "transactions: {}", self.transactions)?;
        writeln!(f, "committed: {}", self.committed)?;
        writeln!(f, "rejected: {}", self.rejected)?;
        writeln!(f, "block_events: {}", self.block_events)?;
        writeln!(f, "early_releases: {}", self.early_releases)?;
        writeln!(f, "mean_queue_wait: {:.2}", self.mean_queue_wait)?;
        writeln!(f, "max_queue_wait: {}", self.max_queue_wait)?;
        writeln!(f, "conflict_edges: {}", self.conflict_edges)?;
        write!(f, "verification: {}", self.verification)
    }
}

/// Queue waits in trace-sequence units: for every block that was later
/// granted, the distance from the block event to the matching grant.
pub fn queue_waits(trace: &[TraceEvent]) -> Vec<u64> {
    let mut blocked: HashMap<(u64, usize), u64> = HashMap::new();
    let mut waits = Vec::new();
    for e in trace {
        match e.event {
            EventKind::Block => {
                blocked.insert((e.req, e.field), e.seq);
            }
            EventKind::Grant => {
                if let Some(at) = blocked.remove(&(e.req, e.field)) {
                    waits.push(e.seq - at);
                }
            }
            _ => {}
        }
    }
    waits
}

/// One iteration's verification verdict against the serial-enumeration
/// oracle. `Skipped` when the committed set exceeds the permutation bound.
pub fn verify_outcome(w: &Workload, run: &RunOutcome) -> Verdict {
    match oracle::check_serializable(w, &run.outcome) {
        Ok(true) => Verdict::Pass,
        Ok(false) => Verdict::Fail,
        Err(oracle::OracleError::BoundExceeded(_)) => Verdict::Skipped,
    }
}

/// Runs a workload per the config, verifying every iteration. Iteration
/// `i` of a deterministic run uses `seed + i`.
pub fn run_workload(w: &Workload, cfg: &RunConfig) -> (MetricsReport, Vec<RunOutcome>, Verdict) {
    let mut runs = Vec::new();
    let mut verdict = Verdict::Pass;
    let mut waits_all: Vec<u64> = Vec::new();
    let mut block_events = 0u64;
    let mut early_releases = 0u64;
    let mut committed = 0u64;
    let mut rejected = 0u64;
    let mut conflict_edges = 0u64;
    for i in 0..cfg.iterations.max(1) {
        let run = if cfg.workers == 0 {
            run_deterministic(w, cfg.mode, cfg.seed.wrapping_add(i as u64))
        } else {
            run_threaded(w, cfg.mode, cfg.workers)
        };
        verdict = verdict.max(verify_outcome(w, &run));
        waits_all.extend(queue_waits(&run.trace));
        block_events += run.counters.monitor.blocks;
        early_releases += run.counters.monitor.early_releases;
        committed += run.counters.committed;
        rejected += run.counters.rejected;
        conflict_edges += oracle::conflict_graph(&run.trace).edges.len() as u64;
        runs.push(run);
    }
    let mean = if waits_all.is_empty() {
        0.0
    } else {
        waits_all.iter().sum::<u64>() as f64 / waits_all.len() as f64
    };
    let report = MetricsReport {
        mode: cfg.mode.to_string(),
        iterations: cfg.iterations.max(1),
        transactions: (w.txns.len() as u64) * (cfg.iterations.max(1) as u64),
        committed,
        rejected,
        block_events,
        early_releases,
        mean_queue_wait: mean,
        max_queue_wait: waits_all.iter().copied().max().unwrap_or(0),
        conflict_edges,
        verification: verdict.name().to_string(),
    };
    (report, runs, verdict)
}
