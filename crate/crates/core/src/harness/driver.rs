//! The two execution drivers.
//!
//! * [`run_deterministic`] — a seeded step-interleaving scheduler on one
//!   thread. Each step is one monitor interaction (admission, resume,
//!   execute+downgrade, or commit); which runnable context steps next is
//!   drawn from the seed, so a seed pins the whole schedule and the trace.
//! * [`run_threaded`] — real concurrency: worker threads pull transaction
//!   scripts and run them through the blocking engine.
//!
//! Both produce the same [`RunOutcome`] shape for the oracle.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::Rng;

use crate::monitor::Admission;
use crate::oracle::{Outcome, Workload};
use crate::trace::TraceEvent;
use crate::txn::{Engine, EngineCounters, SchedulerMode, TxnError, TxnId, TxnStatus};
use crate::value::Value;
use crate::interp;

use super::test_rng;

/// Per-transaction result of a run, in workload order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxnResult {
    pub status: TxnStatus,
    pub returns: Vec<Option<Value>>,
    pub error: Option<TxnError>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub outcome: Outcome,
    pub results: Vec<TxnResult>,
    pub trace: Vec<TraceEvent>,
    pub counters: EngineCounters,
    pub log_lines: Vec<String>,
}

fn setup_engine(w: &Workload, mode: SchedulerMode) -> Engine {
    let engine = Engine::new(mode);
    for decl in &w.adts {
        engine.register_adt(decl).expect("workload ADTs are unique");
    }
    for inst in &w.instances {
        engine
            .create_instance(&inst.name, &inst.adt, inst.init.clone())
            .expect("workload instances are valid");
    }
    engine
}

fn collect(w: &Workload, engine: &Engine, results: Vec<TxnResult>) -> RunOutcome {
    engine.check_quiescent();
    let committed = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.status == TxnStatus::Committed)
        .map(|(i, _)| i)
        .collect();
    let finals = w
        .instances
        .iter()
        .map(|i| {
            (
                i.name.clone(),
                engine.snapshot_instance(&i.name).expect("instance exists"),
            )
        })
        .collect();
    let returns = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.status == TxnStatus::Committed)
        .map(|(i, r)| (i, r.returns.clone()))
        .collect();
    RunOutcome {
        outcome: Outcome {
            committed,
            finals,
            returns,
            faulted: false,
        },
        results,
        trace: engine.trace_events(),
        counters: engine.counters(),
        log_lines: engine.log_lines(),
    }
}

enum Phase {
    /// About to issue the `step`-th operation (== script length: commit).
    AtStep(usize),
    /// Parked in admission for the `step`-th operation.
    Waiting { req: u64, step: usize },
    /// Admitted; the body and downgrade pass run on the next step.
    Exec { req: u64, step: usize },
    Done,
}

struct Ctx {
    txn: TxnId,
    phase: Phase,
    returns: Vec<Option<Value>>,
    error: Option<TxnError>,
}

/// Runs the workload under the seeded deterministic scheduler.
pub fn run_deterministic(w: &Workload, mode: SchedulerMode, seed: u64) -> RunOutcome {
    let engine = setup_engine(w, mode);
    let mut rng = test_rng(seed);
    let mut ctxs: Vec<Ctx> = w
        .txns
        .iter()
        .map(|_| Ctx {
            txn: engine.begin(),
            phase: Phase::AtStep(0),
            returns: Vec::new(),
            error: None,
        })
        .collect();

    loop {
        let runnable: Vec<usize> = {
            let st = engine.lock_state();
            ctxs.iter()
                .enumerate()
                .filter(|(_, c)| match c.phase {
                    Phase::AtStep(_) | Phase::Exec { .. } => true,
                    Phase::Waiting { req, .. } => st.is_woken(req) || st.is_poisoned(req),
                    Phase::Done => false,
                })
                .map(|(i, _)| i)
                .collect()
        };
        if runnable.is_empty() {
            assert!(
                ctxs.iter().all(|c| matches!(c.phase, Phase::Done)),
                "scheduler stuck: waiting contexts with no wake or victim pending"
            );
            break;
        }
        let pick = runnable[rng.random_range(0..runnable.len())];
        step(w, &engine, &mut ctxs[pick]);
    }

    let results = ctxs
        .into_iter()
        .map(|c| TxnResult {
            status: engine.txn_status(c.txn).expect("txn exists"),
            returns: c.returns,
            error: c.error,
        })
        .collect();
    collect(w, &engine, results)
}

fn step(w: &Workload, engine: &Engine, ctx: &mut Ctx) {
    match ctx.phase {
        Phase::AtStep(k) => {
            let script = &w.txns[engine_index(ctx.txn)];
            if k >= script.steps.len() {
                engine.commit(ctx.txn).expect("commit of active transaction");
                engine.notify();
                ctx.phase = Phase::Done;
                return;
            }
            let call = &script.steps[k];
            let admit = {
                let mut st = engine.lock_state();
                st.op_admit(ctx.txn, &call.instance, &call.op, &call.args)
            };
            engine.notify();
            match admit {
                Err(e) => {
                    engine.reject(ctx.txn).expect("active transaction");
                    ctx.error = Some(e);
                    ctx.phase = Phase::Done;
                }
                Ok(a) => match a.admission {
                    Admission::Granted => {
                        ctx.phase = Phase::Exec { req: a.req, step: k };
                    }
                    Admission::Blocked { .. } => {
                        ctx.phase = Phase::Waiting { req: a.req, step: k };
                    }
                },
            }
        }
        Phase::Waiting { req, step: k } => {
            let poisoned = {
                let mut st = engine.lock_state();
                if st.is_poisoned(req) {
                    st.drop_poisoned(req);
                    true
                } else {
                    let adm = st.op_resume(req);
                    match adm {
                        Admission::Granted => ctx.phase = Phase::Exec { req, step: k },
                        Admission::Blocked { .. } => {}
                    }
                    false
                }
            };
            engine.notify();
            if poisoned {
                engine.reject(ctx.txn).expect("victim is active");
                ctx.error = Some(TxnError::DeadlockVictim(ctx.txn));
                ctx.phase = Phase::Done;
            }
        }
        Phase::Exec { req, step: k } => {
            let (opdef, args, store) = {
                let st = engine.lock_state();
                st.exec_context(req)
            };
            let outcome = interp::execute(&opdef, &args, store.as_ref());
            let finish = {
                let mut st = engine.lock_state();
                st.op_finish(req, outcome)
            };
            engine.notify();
            match finish {
                crate::txn::FinishOutcome::Done(ret) => {
                    ctx.returns.push(ret);
                    ctx.phase = Phase::AtStep(k + 1);
                }
                crate::txn::FinishOutcome::Fault(fault) => {
                    engine.reject(ctx.txn).expect("faulting txn is active");
                    ctx.error = Some(TxnError::ExecutionFault {
                        txn: ctx.txn,
                        fault,
                    });
                    ctx.phase = Phase::Done;
                }
            }
        }
        Phase::Done => unreachable!("stepping a finished context"),
    }
}

fn engine_index(txn: TxnId) -> usize {
    txn.0 as usize - 1
}

/// Runs the workload on real worker threads through the blocking engine.
pub fn run_threaded(w: &Workload, mode: SchedulerMode, workers: usize) -> RunOutcome {
    let engine = Arc::new(setup_engine(w, mode));
    let txn_ids: Vec<TxnId> = w.txns.iter().map(|_| engine.begin()).collect();
    let results: Arc<Mutex<Vec<Option<TxnResult>>>> =
        Arc::new(Mutex::new(vec![None; w.txns.len()]));
    let next = Arc::new(AtomicUsize::new(0));
    let workers = workers.clamp(1, w.txns.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let engine = Arc::clone(&engine);
            let results = Arc::clone(&results);
            let next = Arc::clone(&next);
            let txn_ids = &txn_ids;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= w.txns.len() {
                    break;
                }
                let txn = txn_ids[i];
                let mut returns = Vec::new();
                let mut error = None;
                for call in &w.txns[i].steps {
                    match engine.run_operation(txn, &call.instance, &call.op, &call.args) {
                        Ok(ret) => returns.push(ret),
                        Err(e) => {
                            error = Some(e);
                            break;
                        }
                    }
                }
                if error.is_none() {
                    engine.commit(txn).expect("active transaction commits");
                }
                let status = engine.txn_status(txn).expect("txn exists");
                results.lock().unwrap()[i] = Some(TxnResult {
                    status,
                    returns,
                    error,
                });
            });
        }
    });

    let results: Vec<TxnResult> = Arc::try_unwrap(results)
        .expect("workers joined")
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every script ran"))
        .collect();
    collect(w, &engine, results)
}
