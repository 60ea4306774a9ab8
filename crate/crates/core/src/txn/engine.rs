//! The transaction engine.
//!
//! [`EngineState`] is the single source of truth: instance monitors and
//! stores, transaction slots, in-flight admissions, the undo log, and the
//! event trace. Its methods never block, so two drivers share it — the
//! blocking [`Engine`] API parks callers on a condvar, and the
//! deterministic driver in [`crate::harness`] steps transaction contexts
//! explicitly.
//!
//! Control state lives behind one mutex; operation bodies and inverse
//! application always run outside it, touching instance fields through
//! their own per-field locks.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use crate::access::{AccessMode, AccessVector};
use crate::dsl::{AdtDecl, AdtSchema, OperationDef};
use crate::interp::{self, ExecFault, ExecOutcome, ExecutionRecord, SharedStore};
use crate::monitor::{Admission, MonitorCounters, MonitorState};
use crate::trace::{TraceBuf, TraceEvent};
use crate::value::Value;

use super::{LogRecord, SchedulerMode, TxnError, TxnId, TxnStatus, WaitForEdge};

/// Collapses a vector to the classical whole-object mode: a writer if any
/// field is written, otherwise a reader.
fn collapse_to_compat(v: &AccessVector) -> AccessVector {
    let mode = if v.iter().any(|m| m == AccessMode::Write) {
        AccessMode::Write
    } else {
        AccessMode::Read
    };
    AccessVector::new(vec![mode])
}

struct InstanceCtl {
    name: Arc<str>,
    schema: Arc<AdtSchema>,
    monitor: MonitorState,
    store: Arc<SharedStore>,
}

struct ExecutedOp {
    req: u64,
    inst: usize,
    record: ExecutionRecord,
}

struct TxnSlot {
    status: TxnStatus,
    executed: Vec<ExecutedOp>,
}

struct InflightOp {
    txn: TxnId,
    inst: usize,
    op: Arc<OperationDef>,
    args: Vec<Value>,
    control_static: AccessVector,
    woken: bool,
    poisoned: bool,
}

/// Aggregate counters over a whole run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineCounters {
    pub monitor: MonitorCounters,
    pub committed: u64,
    pub rejected: u64,
    pub deadlock_victims: u64,
    pub faults: u64,
}

/// The outcome of finishing an operation; a fault still finished the
/// out-control pass and logged its undo record.
pub(crate) enum FinishOutcome {
    Done(Option<Value>),
    Fault(ExecFault),
}

/// Result of one admission attempt at the engine level.
pub(crate) struct Admit {
    pub req: u64,
    pub admission: Admission,
}

pub struct EngineState {
    mode: SchedulerMode,
    adts: HashMap<String, AdtDecl>,
    instances: Vec<InstanceCtl>,
    inst_index: HashMap<String, usize>,
    txns: Vec<TxnSlot>,
    inflight: HashMap<u64, InflightOp>,
    txn_inflight: HashMap<TxnId, u64>,
    next_req: u64,
    trace: TraceBuf,
    undo_log: Vec<LogRecord>,
    log_lines: Vec<String>,
    log_sink: Option<Box<dyn Write + Send>>,
    committed: u64,
    rejected: u64,
    deadlock_victims: u64,
    faults: u64,
}

impl EngineState {
    fn new(mode: SchedulerMode) -> Self {
        EngineState {
            mode,
            adts: HashMap::new(),
            instances: Vec::new(),
            inst_index: HashMap::new(),
            txns: Vec::new(),
            inflight: HashMap::new(),
            txn_inflight: HashMap::new(),
            next_req: 0,
            trace: TraceBuf::new(),
            undo_log: Vec::new(),
            log_lines: Vec::new(),
            log_sink: None,
            committed: 0,
            rejected: 0,
            deadlock_victims: 0,
            faults: 0,
        }
    }

    pub fn mode(&self) -> SchedulerMode {
        self.mode
    }

    pub fn register_adt(&mut self, decl: &AdtDecl) -> Result<(), TxnError> {
        let name = decl.schema.name.clone();
        if self.adts.contains_key(&name) {
            return Err(TxnError::DuplicateAdt(name));
        }
        self.adts.insert(name, decl.clone());
        Ok(())
    }

    pub fn create_instance(
        &mut self,
        name: &str,
        adt: &str,
        values: Vec<Value>,
    ) -> Result<(), TxnError> {
        if self.inst_index.contains_key(name) {
            return Err(TxnError::DuplicateInstance(name.to_string()));
        }
        let decl = self
            .adts
            .get(adt)
            .ok_or_else(|| TxnError::UnknownAdt(adt.to_string()))?;
        let types: Vec<_> = decl.schema.fields.iter().map(|f| f.ty).collect();
        interp::check_instance_values(&values, &types).map_err(TxnError::BadArguments)?;
        let control_dim = match self.mode {
            SchedulerMode::Compat => 1,
            _ => decl.schema.dimension(),
        };
        let arc_name: Arc<str> = Arc::from(name);
        self.instances.push(InstanceCtl {
            name: Arc::clone(&arc_name),
            schema: Arc::clone(&decl.schema),
            monitor: MonitorState::new(arc_name, control_dim),
            store: Arc::new(SharedStore::new(values)),
        });
        self.inst_index
            .insert(name.to_string(), self.instances.len() - 1);
        Ok(())
    }

    pub fn begin(&mut self) -> TxnId {
        self.txns.push(TxnSlot {
            status: TxnStatus::Active,
            executed: Vec::new(),
        });
        TxnId(self.txns.len() as u64)
    }

    pub fn txn_status(&self, txn: TxnId) -> Result<TxnStatus, TxnError> {
        self.slot(txn).map(|s| s.status)
    }

    fn slot(&self, txn: TxnId) -> Result<&TxnSlot, TxnError> {
        if txn.0 == 0 {
            return Err(TxnError::UnknownTxn(txn));
        }
        self.txns
            .get(txn.0 as usize - 1)
            .ok_or(TxnError::UnknownTxn(txn))
    }

    fn require_active(&self, txn: TxnId) -> Result<(), TxnError> {
        let status = self.slot(txn)?.status;
        if status != TxnStatus::Active {
            return Err(TxnError::NotActive { txn, status });
        }
        Ok(())
    }

    /// Admission step: validates the call, claims the mode-mapped static
    /// vector, and runs a deadlock pass if the request blocked.
    pub(crate) fn op_admit(
        &mut self,
        txn: TxnId,
        instance: &str,
        op: &str,
        args: &[Value],
    ) -> Result<Admit, TxnError> {
        self.require_active(txn)?;
        assert!(
            !self.txn_inflight.contains_key(&txn),
            "transaction {txn} issued an operation while one is in flight"
        );
        let inst_idx = *self
            .inst_index
            .get(instance)
            .ok_or_else(|| TxnError::UnknownInstance(instance.to_string()))?;
        let inst = &self.instances[inst_idx];
        let decl = &self.adts[inst.schema.name.as_str()];
        let opdef = decl
            .op(op)
            .ok_or_else(|| TxnError::UnknownOperation {
                adt: inst.schema.name.clone(),
                op: op.to_string(),
            })?
            .clone();
        interp::check_args(&opdef, args).map_err(TxnError::BadArguments)?;

        let control_static = match self.mode {
            SchedulerMode::Compat => collapse_to_compat(&opdef.static_dav),
            _ => opdef.static_dav.clone(),
        };
        let req = self.next_req;
        self.next_req += 1;
        self.inflight.insert(
            req,
            InflightOp {
                txn,
                inst: inst_idx,
                op: Arc::clone(&opdef),
                args: args.to_vec(),
                control_static: control_static.clone(),
                woken: false,
                poisoned: false,
            },
        );
        self.txn_inflight.insert(txn, req);
        let op_name: Arc<str> = Arc::from(opdef.name.as_str());
        let (monitor, trace) = monitor_and_trace(&mut self.instances, inst_idx, &mut self.trace);
        let admission = monitor.in_control(req, txn.0, op_name, control_static, trace);
        self.drain_signals(inst_idx);
        if matches!(admission, Admission::Blocked { .. }) {
            self.detect_and_resolve();
        }
        Ok(Admit { req, admission })
    }

    /// Continues a woken request; runs a deadlock pass if it blocked again.
    pub(crate) fn op_resume(&mut self, req: u64) -> Admission {
        let inst_idx = {
            let fl = self.inflight.get_mut(&req).expect("resume of unknown op");
            fl.woken = false;
            fl.inst
        };
        let (monitor, trace) = monitor_and_trace(&mut self.instances, inst_idx, &mut self.trace);
        let admission = monitor.resume(req, trace);
        self.drain_signals(inst_idx);
        if matches!(admission, Admission::Blocked { .. }) {
            self.detect_and_resolve();
        }
        admission
    }

    pub(crate) fn is_woken(&self, req: u64) -> bool {
        self.inflight.get(&req).map(|f| f.woken).unwrap_or(false)
    }

    pub(crate) fn is_poisoned(&self, req: u64) -> bool {
        self.inflight.get(&req).map(|f| f.poisoned).unwrap_or(false)
    }

    /// Discards a poisoned in-flight admission; its monitor request was
    /// already cancelled by the deadlock pass.
    pub(crate) fn drop_poisoned(&mut self, req: u64) -> TxnId {
        let fl = self.inflight.remove(&req).expect("unknown in-flight op");
        assert!(fl.poisoned, "dropping a live admission");
        self.txn_inflight.remove(&fl.txn);
        fl.txn
    }

    /// Everything needed to run the operation body outside the lock.
    pub(crate) fn exec_context(&self, req: u64) -> (Arc<OperationDef>, Vec<Value>, Arc<SharedStore>) {
        let fl = &self.inflight[&req];
        (
            Arc::clone(&fl.op),
            fl.args.clone(),
            Arc::clone(&self.instances[fl.inst].store),
        )
    }

    /// Post-execution step: downgrade pass, undo-log append, and the
    /// executed-operation record. A fault is reported to the caller after
    /// both are done, so the reject path sees a complete picture.
    pub(crate) fn op_finish(&mut self, req: u64, outcome: ExecOutcome) -> FinishOutcome {
        let fl = self.inflight.remove(&req).expect("finish of unknown op");
        self.txn_inflight.remove(&fl.txn);
        let control_dynamic = match self.mode {
            SchedulerMode::Compat | SchedulerMode::StaticAv => fl.control_static.clone(),
            SchedulerMode::DynamicAv => outcome.record.dynamic_dav.clone(),
        };
        let (monitor, trace) = monitor_and_trace(&mut self.instances, fl.inst, &mut self.trace);
        monitor.out_control(req, &control_dynamic, trace);
        self.drain_signals(fl.inst);

        let inst = &self.instances[fl.inst];
        let log_rec = LogRecord {
            txn: fl.txn,
            instance: Arc::clone(&inst.name),
            op: outcome.record.op_name.clone(),
            before_image: outcome.record.before_image.clone(),
            dynamic_dav: outcome.record.dynamic_dav.clone(),
        };
        let line = log_rec.to_line(&inst.schema);
        if let Some(sink) = &mut self.log_sink {
            let _ = writeln!(sink, "{line}");
        }
        self.log_lines.push(line);
        self.undo_log.push(log_rec);

        let ret = outcome.record.ret.clone();
        self.txns[fl.txn.0 as usize - 1].executed.push(ExecutedOp {
            req,
            inst: fl.inst,
            record: outcome.record,
        });
        match outcome.fault {
            Some(fault) => {
                self.faults += 1;
                FinishOutcome::Fault(fault)
            }
            None => FinishOutcome::Done(ret),
        }
    }

    /// Terminal release for a committing transaction: status first, then
    /// every operation's remaining holdings in reverse execution order.
    pub(crate) fn commit(&mut self, txn: TxnId) -> Result<(), TxnError> {
        self.require_active(txn)?;
        assert!(
            !self.txn_inflight.contains_key(&txn),
            "commit of {txn} with an operation in flight"
        );
        let idx = txn.0 as usize - 1;
        self.txns[idx].status = TxnStatus::Committed;
        let releases: Vec<(u64, usize)> = self.txns[idx]
            .executed
            .iter()
            .rev()
            .map(|e| (e.req, e.inst))
            .collect();
        for (req, inst_idx) in releases {
            let (monitor, trace) =
                monitor_and_trace(&mut self.instances, inst_idx, &mut self.trace);
            monitor.commit_or_reject(req, trace);
            self.drain_signals(inst_idx);
        }
        self.undo_log.retain(|r| r.txn != txn);
        self.committed += 1;
        Ok(())
    }

    /// First half of a reject: flips the status and hands back the undo
    /// work (records in reverse execution order with their stores) to run
    /// outside the lock. Holdings are *not* released yet.
    pub(crate) fn reject_phase1(
        &mut self,
        txn: TxnId,
    ) -> Result<Vec<(Arc<SharedStore>, ExecutionRecord)>, TxnError> {
        self.require_active(txn)?;
        assert!(
            !self.txn_inflight.contains_key(&txn),
            "reject of {txn} with an operation in flight"
        );
        let idx = txn.0 as usize - 1;
        self.txns[idx].status = TxnStatus::Rejected;
        Ok(self.txns[idx]
            .executed
            .iter()
            .rev()
            .map(|e| (Arc::clone(&self.instances[e.inst].store), e.record.clone()))
            .collect())
    }

    /// Second half of a reject, after the inverses ran: terminal release
    /// per operation in reverse order.
    pub(crate) fn reject_phase2(&mut self, txn: TxnId) {
        let idx = txn.0 as usize - 1;
        debug_assert_eq!(self.txns[idx].status, TxnStatus::Rejected);
        let releases: Vec<(u64, usize)> = self.txns[idx]
            .executed
            .iter()
            .rev()
            .map(|e| (e.req, e.inst))
            .collect();
        for (req, inst_idx) in releases {
            let (monitor, trace) =
                monitor_and_trace(&mut self.instances, inst_idx, &mut self.trace);
            monitor.commit_or_reject(req, trace);
            self.drain_signals(inst_idx);
        }
        self.undo_log.retain(|r| r.txn != txn);
        self.rejected += 1;
    }

    fn drain_signals(&mut self, inst_idx: usize) {
        for req in self.instances[inst_idx].monitor.take_signals() {
            if let Some(fl) = self.inflight.get_mut(&req) {
                fl.woken = true;
            }
        }
    }

    /// Current wait-for edges: one per blocked request and conflicting
    /// holder, plus edges to requests queued ahead on the same field.
    pub fn wait_for_edges(&self) -> Vec<WaitForEdge> {
        let mut out = Vec::new();
        for inst in &self.instances {
            for w in inst.monitor.wait_info() {
                for &(holder, _) in &w.holders {
                    out.push(WaitForEdge {
                        waiter: TxnId(w.txn),
                        holder: TxnId(holder),
                        instance: Arc::clone(&inst.name),
                        field: w.field,
                    });
                }
                for &ahead in &w.ahead {
                    out.push(WaitForEdge {
                        waiter: TxnId(w.txn),
                        holder: TxnId(ahead),
                        instance: Arc::clone(&inst.name),
                        field: w.field,
                    });
                }
            }
        }
        out
    }

    /// Finds wait-for cycles and rejects the youngest transaction of each
    /// until the graph is acyclic. Victims' monitor requests are cancelled
    /// here; their contexts observe the poisoning and run the reject.
    pub(crate) fn detect_and_resolve(&mut self) -> Vec<TxnId> {
        let mut victims = Vec::new();
        loop {
            let mut edges: HashMap<TxnId, BTreeSet<TxnId>> = HashMap::new();
            let mut blocked_at: HashMap<TxnId, (usize, u64)> = HashMap::new();
            for (ii, inst) in self.instances.iter().enumerate() {
                for w in inst.monitor.wait_info() {
                    let waiter = TxnId(w.txn);
                    blocked_at.insert(waiter, (ii, w.req));
                    let entry = edges.entry(waiter).or_default();
                    entry.extend(w.holders.iter().map(|&(h, _)| TxnId(h)));
                    entry.extend(w.ahead.iter().map(|&a| TxnId(a)));
                }
            }
            let Some(cycle) = find_cycle(&edges) else {
                break;
            };
            let victim = *cycle.iter().max().expect("cycles are non-empty");
            let (inst_idx, req) = blocked_at[&victim];
            let (monitor, trace) =
                monitor_and_trace(&mut self.instances, inst_idx, &mut self.trace);
            monitor.cancel(req, trace);
            self.drain_signals(inst_idx);
            self.inflight
                .get_mut(&req)
                .expect("victim has an in-flight op")
                .poisoned = true;
            self.deadlock_victims += 1;
            victims.push(victim);
        }
        victims
    }

    pub fn counters(&self) -> EngineCounters {
        let mut monitor = MonitorCounters::default();
        for inst in &self.instances {
            let c = inst.monitor.counters();
            monitor.entry_calls += c.entry_calls;
            monitor.field_visits += c.field_visits;
            monitor.blocks += c.blocks;
            monitor.grants += c.grants;
            monitor.early_releases += c.early_releases;
        }
        EngineCounters {
            monitor,
            committed: self.committed,
            rejected: self.rejected,
            deadlock_victims: self.deadlock_victims,
            faults: self.faults,
        }
    }

    pub fn trace_events(&self) -> Vec<TraceEvent> {
        self.trace.events().to_vec()
    }

    pub fn trace_text(&self) -> String {
        self.trace.to_text()
    }

    pub fn log_lines(&self) -> Vec<String> {
        self.log_lines.clone()
    }

    /// Live (unretired) undo records.
    pub fn undo_records(&self) -> &[LogRecord] {
        &self.undo_log
    }

    pub fn snapshot_instance(&self, name: &str) -> Result<Vec<Value>, TxnError> {
        let idx = self
            .inst_index
            .get(name)
            .ok_or_else(|| TxnError::UnknownInstance(name.to_string()))?;
        Ok(self.instances[*idx].store.values())
    }

    pub fn instance_names(&self) -> Vec<String> {
        self.instances.iter().map(|i| i.name.to_string()).collect()
    }

    /// Quiescent self-check: per-field consistency everywhere plus queue
    /// heads that genuinely conflict.
    pub fn check_quiescent(&self) {
        for inst in &self.instances {
            inst.monitor.check_invariant();
            inst.monitor.check_quiescent();
        }
    }
}

/// Split borrow: one instance's monitor and the shared trace buffer.
fn monitor_and_trace<'a>(
    instances: &'a mut [InstanceCtl],
    idx: usize,
    trace: &'a mut TraceBuf,
) -> (&'a mut MonitorState, &'a mut TraceBuf) {
    (&mut instances[idx].monitor, trace)
}

fn find_cycle(edges: &HashMap<TxnId, BTreeSet<TxnId>>) -> Option<Vec<TxnId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    fn dfs(
        node: TxnId,
        edges: &HashMap<TxnId, BTreeSet<TxnId>>,
        colors: &mut HashMap<TxnId, Color>,
        path: &mut Vec<TxnId>,
    ) -> Option<Vec<TxnId>> {
        colors.insert(node, Color::Gray);
        path.push(node);
        if let Some(nexts) = edges.get(&node) {
            for &next in nexts {
                match colors.get(&next).copied().unwrap_or(Color::White) {
                    Color::Gray => {
                        let start = path.iter().position(|&t| t == next).unwrap();
                        return Some(path[start..].to_vec());
                    }
                    Color::White => {
                        if let Some(cycle) = dfs(next, edges, colors, path) {
                            return Some(cycle);
                        }
                    }
                    Color::Black => {}
                }
            }
        }
        path.pop();
        colors.insert(node, Color::Black);
        None
    }
    let mut colors = HashMap::new();
    let mut nodes: Vec<TxnId> = edges.keys().copied().collect();
    nodes.sort();
    for node in nodes {
        if colors.get(&node).copied().unwrap_or(Color::White) == Color::White {
            let mut path = Vec::new();
            if let Some(cycle) = dfs(node, edges, &mut colors, &mut path) {
                return Some(cycle);
            }
        }
    }
    None
}

/// Blocking engine: transactions run on caller threads; a blocked
/// admission parks on a condvar until its waker grants the field or a
/// deadlock pass rejects it.
pub struct Engine {
    state: Mutex<EngineState>,
    cv: Condvar,
}

impl Engine {
    pub fn new(mode: SchedulerMode) -> Self {
        Engine {
            state: Mutex::new(EngineState::new(mode)),
            cv: Condvar::new(),
        }
    }

    pub(crate) fn lock_state(&self) -> MutexGuard<'_, EngineState> {
        self.state.lock().unwrap()
    }

    /// Signals any parked admissions; the deterministic driver calls this
    /// after stepping state directly.
    pub(crate) fn notify(&self) {
        self.cv.notify_all();
    }

    pub fn mode(&self) -> SchedulerMode {
        self.lock_state().mode()
    }

    /// Streams undo-log lines to a writer as they are appended.
    pub fn set_log_sink(&self, sink: Box<dyn Write + Send>) {
        self.lock_state().log_sink = Some(sink);
    }

    pub fn register_adt(&self, decl: &AdtDecl) -> Result<(), TxnError> {
        self.lock_state().register_adt(decl)
    }

    pub fn create_instance(&self, name: &str, adt: &str, values: Vec<Value>) -> Result<(), TxnError> {
        self.lock_state().create_instance(name, adt, values)
    }

    pub fn begin(&self) -> TxnId {
        self.lock_state().begin()
    }

    pub fn txn_status(&self, txn: TxnId) -> Result<TxnStatus, TxnError> {
        self.lock_state().txn_status(txn)
    }

    /// Runs one operation for a transaction: admission (blocking as
    /// needed), execution outside the lock, downgrade pass, undo-log
    /// append. A deadlock victimisation or an execution fault rejects the
    /// whole transaction before returning the error.
    pub fn run_operation(
        &self,
        txn: TxnId,
        instance: &str,
        op: &str,
        args: &[Value],
    ) -> Result<Option<Value>, TxnError> {
        let mut st = self.state.lock().unwrap();
        let admit = st.op_admit(txn, instance, op, args)?;
        let req = admit.req;
        let mut admission = admit.admission;
        loop {
            match admission {
                Admission::Granted => break,
                Admission::Blocked { .. } => {
                    self.cv.notify_all();
                    loop {
                        if st.is_poisoned(req) {
                            st.drop_poisoned(req);
                            drop(st);
                            self.reject(txn).expect("victim is active");
                            return Err(TxnError::DeadlockVictim(txn));
                        }
                        if st.is_woken(req) {
                            break;
                        }
                        st = self.cv.wait(st).unwrap();
                    }
                    admission = st.op_resume(req);
                }
            }
        }
        let (opdef, args, store) = st.exec_context(req);
        drop(st);
        let outcome = interp::execute(&opdef, &args, store.as_ref());
        let mut st = self.state.lock().unwrap();
        let finish = st.op_finish(req, outcome);
        self.cv.notify_all();
        drop(st);
        match finish {
            FinishOutcome::Done(ret) => Ok(ret),
            FinishOutcome::Fault(fault) => {
                self.reject(txn).expect("faulting transaction is active");
                Err(TxnError::ExecutionFault { txn, fault })
            }
        }
    }

    /// Commits: terminal release of every holding, in reverse execution
    /// order, strictly after the status flip.
    pub fn commit(&self, txn: TxnId) -> Result<(), TxnError> {
        let mut st = self.state.lock().unwrap();
        st.commit(txn)?;
        self.cv.notify_all();
        Ok(())
    }

    /// Rejects: applies before-image inverses in reverse execution order
    /// — outside the lock and without any monitor interaction — then
    /// releases every holding.
    pub fn reject(&self, txn: TxnId) -> Result<(), TxnError> {
        let mut st = self.state.lock().unwrap();
        let inverses = st.reject_phase1(txn)?;
        drop(st);
        for (store, record) in &inverses {
            interp::apply_inverse(record, store.as_ref())
                .expect("undo records match their instances");
        }
        let mut st = self.state.lock().unwrap();
        st.reject_phase2(txn);
        self.cv.notify_all();
        Ok(())
    }

    /// Manual deadlock pass; blocked admissions normally trigger this
    /// themselves on every new wait edge.
    pub fn detect_deadlocks(&self) -> Vec<TxnId> {
        let mut st = self.state.lock().unwrap();
        let victims = st.detect_and_resolve();
        if !victims.is_empty() {
            self.cv.notify_all();
        }
        victims
    }

    pub fn wait_for_edges(&self) -> Vec<WaitForEdge> {
        self.lock_state().wait_for_edges()
    }

    pub fn counters(&self) -> EngineCounters {
        self.lock_state().counters()
    }

    pub fn trace_events(&self) -> Vec<TraceEvent> {
        self.lock_state().trace_events()
    }

    pub fn trace_text(&self) -> String {
        self.lock_state().trace_text()
    }

    pub fn log_lines(&self) -> Vec<String> {
        self.lock_state().log_lines()
    }

    pub fn snapshot_instance(&self, name: &str) -> Result<Vec<Value>, TxnError> {
        self.lock_state().snapshot_instance(name)
    }

    pub fn check_quiescent(&self) {
        self.lock_state().check_quiescent()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_adt;
    use std::time::Duration;

    const PAIR: &str = "\
adt Pair(a: integer, b: integer)
op setA(v: integer) { a := v }
op setB(v: integer) { b := v }
op getA() -> integer { return a }
op sum() -> integer { return a + b }
op capA(lim: integer) { if a > lim then { a := lim } }
";

    fn engine(mode: SchedulerMode) -> Arc<Engine> {
        let e = Engine::new(mode);
        e.register_adt(&parse_adt(PAIR).unwrap()).unwrap();
        e.create_instance("p", "Pair", vec![Value::Int(1), Value::Int(2)])
            .unwrap();
        Arc::new(e)
    }

    fn wait_until(mut cond: impl FnMut() -> bool) {
        for _ in 0..2000 {
            if cond() {
                return;
            }
            std::thread::sleep(Duration::from_millis(1));
        }
        panic!("condition not reached in time");
    }

    #[test]
    fn commuting_ops_never_block() {
        let e = engine(SchedulerMode::StaticAv);
        let t1 = e.begin();
        let t2 = e.begin();
        e.run_operation(t1, "p", "setA", &[Value::Int(10)]).unwrap();
        e.run_operation(t2, "p", "setB", &[Value::Int(20)]).unwrap();
        e.commit(t1).unwrap();
        e.commit(t2).unwrap();
        assert_eq!(e.counters().monitor.blocks, 0);
        assert_eq!(
            e.snapshot_instance("p").unwrap(),
            vec![Value::Int(10), Value::Int(20)]
        );
    }

    #[test]
    fn conflicting_write_blocks_until_commit() {
        let e = engine(SchedulerMode::StaticAv);
        let t1 = e.begin();
        let t2 = e.begin();
        e.run_operation(t1, "p", "setA", &[Value::Int(10)]).unwrap();
        let e2 = Arc::clone(&e);
        let handle = std::thread::spawn(move || {
            e2.run_operation(t2, "p", "setA", &[Value::Int(20)]).unwrap();
            e2.commit(t2).unwrap();
        });
        wait_until(|| e.counters().monitor.blocks == 1);
        // Still blocked: strict 2PL holds the write to commit.
        assert_eq!(e.txn_status(t2).unwrap(), TxnStatus::Active);
        e.commit(t1).unwrap();
        handle.join().unwrap();
        assert_eq!(
            e.snapshot_instance("p").unwrap(),
            vec![Value::Int(20), Value::Int(2)]
        );
        e.check_quiescent();
    }

    #[test]
    fn same_transaction_never_self_blocks() {
        let e = engine(SchedulerMode::StaticAv);
        let t = e.begin();
        e.run_operation(t, "p", "setA", &[Value::Int(5)]).unwrap();
        let got = e.run_operation(t, "p", "getA", &[]).unwrap();
        assert_eq!(got, Some(Value::Int(5)));
        e.commit(t).unwrap();
        assert_eq!(e.counters().monitor.blocks, 0);
    }

    #[test]
    fn reject_restores_pre_transaction_state() {
        let e = engine(SchedulerMode::DynamicAv);
        let t = e.begin();
        e.run_operation(t, "p", "setA", &[Value::Int(99)]).unwrap();
        e.run_operation(t, "p", "setB", &[Value::Int(98)]).unwrap();
        assert_eq!(
            e.snapshot_instance("p").unwrap(),
            vec![Value::Int(99), Value::Int(98)]
        );
        e.reject(t).unwrap();
        assert_eq!(
            e.snapshot_instance("p").unwrap(),
            vec![Value::Int(1), Value::Int(2)]
        );
        assert_eq!(e.txn_status(t).unwrap(), TxnStatus::Rejected);
        // Undo records are retired with the transaction.
        assert!(e.lock_state().undo_records().is_empty());
    }

    #[test]
    fn terminal_calls_are_rejected_twice() {
        let e = engine(SchedulerMode::StaticAv);
        let t = e.begin();
        e.commit(t).unwrap();
        assert!(matches!(
            e.commit(t),
            Err(TxnError::NotActive { status: TxnStatus::Committed, .. })
        ));
        assert!(matches!(
            e.reject(t),
            Err(TxnError::NotActive { status: TxnStatus::Committed, .. })
        ));
    }

    #[test]
    fn execution_fault_auto_rejects() {
        let e = Engine::new(SchedulerMode::DynamicAv);
        e.register_adt(
            &parse_adt(
                "\
adt D(x: integer, y: integer)
op crash() { x := 5; y := y / (x - 5) }
",
            )
            .unwrap(),
        )
        .unwrap();
        e.create_instance("d", "D", vec![Value::Int(1), Value::Int(2)])
            .unwrap();
        let t = e.begin();
        let err = e.run_operation(t, "d", "crash", &[]).unwrap_err();
        assert!(matches!(err, TxnError::ExecutionFault { .. }));
        assert_eq!(e.txn_status(t).unwrap(), TxnStatus::Rejected);
        // The partial write of x was rolled back.
        assert_eq!(
            e.snapshot_instance("d").unwrap(),
            vec![Value::Int(1), Value::Int(2)]
        );
        e.check_quiescent();
    }

    #[test]
    fn two_cycle_deadlock_rejects_youngest() {
        let e = engine(SchedulerMode::StaticAv);
        e.create_instance("q", "Pair", vec![Value::Int(0), Value::Int(0)])
            .unwrap();
        let t1 = e.begin();
        let t2 = e.begin();
        e.run_operation(t1, "p", "setA", &[Value::Int(1)]).unwrap();
        e.run_operation(t2, "q", "setA", &[Value::Int(2)]).unwrap();
        let e2 = Arc::clone(&e);
        let handle = std::thread::spawn(move || {
            // Blocks behind t2's write on q.a.
            e2.run_operation(t1, "q", "setA", &[Value::Int(3)])
        });
        wait_until(|| e.counters().monitor.blocks == 1);
        assert!(!e.wait_for_edges().is_empty());
        // Closing the cycle victimises the youngest transaction (t2).
        let err = e.run_operation(t2, "p", "setA", &[Value::Int(4)]).unwrap_err();
        assert!(matches!(err, TxnError::DeadlockVictim(v) if v == t2));
        assert_eq!(e.txn_status(t2).unwrap(), TxnStatus::Rejected);
        // t1's blocked operation is granted once the victim releases.
        handle.join().unwrap().unwrap();
        e.commit(t1).unwrap();
        assert_eq!(
            e.snapshot_instance("q").unwrap(),
            vec![Value::Int(3), Value::Int(0)]
        );
        assert_eq!(e.counters().deadlock_victims, 1);
        e.check_quiescent();
    }

    #[test]
    fn no_deadlocks_in_acyclic_waits() {
        let e = engine(SchedulerMode::StaticAv);
        let t1 = e.begin();
        let t2 = e.begin();
        e.run_operation(t1, "p", "setA", &[Value::Int(1)]).unwrap();
        let e2 = Arc::clone(&e);
        let handle = std::thread::spawn(move || {
            e2.run_operation(t2, "p", "getA", &[]).unwrap();
            e2.commit(t2).unwrap();
        });
        wait_until(|| e.counters().monitor.blocks == 1);
        assert!(e.detect_deadlocks().is_empty());
        e.commit(t1).unwrap();
        handle.join().unwrap();
        assert_eq!(e.counters().deadlock_victims, 0);
    }

    #[test]
    fn downgrade_admits_blocked_reader_before_commit() {
        let e = engine(SchedulerMode::DynamicAv);
        let t1 = e.begin();
        let t2 = e.begin();
        // capA claims (W,N) but a=1 <= lim=5 leaves it at (R,N).
        e.run_operation(t1, "p", "capA", &[Value::Int(5)]).unwrap();
        // Different transaction can read immediately: the write claim was
        // downgraded at the end of execution.
        let got = e.run_operation(t2, "p", "getA", &[]).unwrap();
        assert_eq!(got, Some(Value::Int(1)));
        assert_eq!(e.txn_status(t1).unwrap(), TxnStatus::Active);
        assert!(e.counters().monitor.early_releases >= 1);
        e.commit(t1).unwrap();
        e.commit(t2).unwrap();
    }

    #[test]
    fn static_mode_holds_write_claim_to_commit() {
        let e = engine(SchedulerMode::StaticAv);
        let t1 = e.begin();
        let t2 = e.begin();
        e.run_operation(t1, "p", "capA", &[Value::Int(5)]).unwrap();
        let e2 = Arc::clone(&e);
        let handle = std::thread::spawn(move || {
            e2.run_operation(t2, "p", "getA", &[]).unwrap();
            e2.commit(t2).unwrap();
        });
        wait_until(|| e.counters().monitor.blocks == 1);
        e.commit(t1).unwrap();
        handle.join().unwrap();
        assert_eq!(e.counters().monitor.early_releases, 0);
    }

    #[test]
    fn compat_mode_blocks_disjoint_writers() {
        let e = engine(SchedulerMode::Compat);
        let t1 = e.begin();
        let t2 = e.begin();
        e.run_operation(t1, "p", "setA", &[Value::Int(10)]).unwrap();
        let e2 = Arc::clone(&e);
        let handle = std::thread::spawn(move || {
            e2.run_operation(t2, "p", "setB", &[Value::Int(20)]).unwrap();
            e2.commit(t2).unwrap();
        });
        wait_until(|| e.counters().monitor.blocks == 1);
        e.commit(t1).unwrap();
        handle.join().unwrap();
        assert!(e.counters().monitor.blocks >= 1);
    }

    #[test]
    fn log_lines_record_written_fields() {
        let e = engine(SchedulerMode::DynamicAv);
        let t = e.begin();
        e.run_operation(t, "p", "setA", &[Value::Int(42)]).unwrap();
        e.run_operation(t, "p", "sum", &[]).unwrap();
        e.commit(t).unwrap();
        assert_eq!(
            e.log_lines(),
            vec!["LOG 1 p setA a=1".to_string(), "LOG 1 p sum".to_string()]
        );
    }
}
