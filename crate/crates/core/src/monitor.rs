//! Per-instance scheduler: per-field reader counts and writer flags,
//! per-field FIFO wait queues, downgrading, and cascading wakeups.
//!
//! The monitor is written as a pure state machine so that both execution
//! drivers share it: the threaded engine wraps it in a mutex and parks
//! blocked callers on a condvar, while the deterministic driver steps
//! contexts explicitly. Entry points never block; an admission that cannot
//! proceed enqueues the request and returns [`Admission::Blocked`], and
//! wakeups are returned as signals that the driver delivers.
//!
//! Admission control per field, in ascending field order:
//!
//! * `Read` waits while a writer holds the field or the field's queue is
//!   non-empty; `Write` additionally waits for readers to drain.
//! * A transaction already holding a mode at least as strong is granted
//!   immediately (holdings belong to transactions, not operations, so an
//!   operation never blocks on its own transaction).
//! * A `Read` -> `Write` upgrade waits at the *front* of the field queue
//!   until its transaction is the sole reader.
//!
//! A waiter is granted by its waker: whoever releases the last conflicting
//! holding transfers the field to the queue head and signals it. A woken
//! reader wakes the next entry iff that entry is also a reader, so a grant
//! or release wakes at most one entry directly and reader cascades
//! propagate one hop per woken reader.
//!
//! Queueing on a non-empty queue keeps every field queue strictly FIFO:
//! a late reader never overtakes a waiting writer. Under a single
//! operation per transaction the counters behave exactly like the
//! classical reader-count/writer-flag pair; reader counts here count
//! *transactions*, so "one writer per field" means one transaction.
//!
//! After every entry-point call the per-field invariant must hold: on each
//! field either readers and no writer, or one writer and no readers. That
//! is asserted by [`MonitorState::check_invariant`], which the engine runs
//! on every exit.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use crate::access::{AccessMode, AccessVector};
use crate::trace::{EventKind, TraceBuf};

/// Outcome of an admission attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Granted,
    Blocked { field: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaitKind {
    Reader,
    Writer,
    Upgrade,
}

/// Why a contribution shrank; decides the trace event kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Reason {
    Downgrade,
    Terminal,
}

impl WaitKind {
    /// The paper's queue entries carry a single reader flag; upgrades wait
    /// for a write mode, so they are not field readers.
    pub fn is_field_reader(self) -> bool {
        matches!(self, WaitKind::Reader)
    }

    fn wanted_mode(self) -> AccessMode {
        match self {
            WaitKind::Reader => AccessMode::Read,
            WaitKind::Writer | WaitKind::Upgrade => AccessMode::Write,
        }
    }
}

#[derive(Debug)]
struct Waiting {
    req: u64,
    txn: u64,
    kind: WaitKind,
}

#[derive(Debug, Default)]
struct Hold {
    read_refs: u32,
    write_refs: u32,
}

impl Hold {
    fn mode(&self) -> AccessMode {
        if self.write_refs > 0 {
            AccessMode::Write
        } else if self.read_refs > 0 {
            AccessMode::Read
        } else {
            AccessMode::Null
        }
    }

    fn add(&mut self, m: AccessMode) {
        match m {
            AccessMode::Read => self.read_refs += 1,
            AccessMode::Write => self.write_refs += 1,
            AccessMode::Null => {}
        }
    }

    fn remove(&mut self, m: AccessMode) {
        match m {
            AccessMode::Read => {
                assert!(self.read_refs > 0, "read released but not held");
                self.read_refs -= 1;
            }
            AccessMode::Write => {
                assert!(self.write_refs > 0, "write released but not held");
                self.write_refs -= 1;
            }
            AccessMode::Null => {}
        }
    }

    fn is_empty(&self) -> bool {
        self.read_refs == 0 && self.write_refs == 0
    }
}

#[derive(Debug, Default)]
struct FieldCtl {
    /// Number of distinct transactions currently reading this field.
    readers: u32,
    /// Transaction currently writing this field, if any.
    writer: Option<u64>,
    queue: VecDeque<Waiting>,
    holds: HashMap<u64, Hold>,
}

/// One operation invocation's standing in the monitor, from admission
/// until its terminal release.
#[derive(Debug)]
struct ReqState {
    txn: u64,
    op: Arc<str>,
    vector: AccessVector,
    /// This request's current per-field contribution (the static mode once
    /// granted, the dynamic mode after the downgrade pass).
    current: Vec<AccessMode>,
    next_field: usize,
    blocked_at: Option<(usize, WaitKind)>,
    admitted: bool,
    /// Field-loop iterations performed for the admission of this request.
    visits: u64,
}

/// A blocked entry described for deadlock detection: who waits, on what,
/// who currently holds the field, and who is queued ahead.
#[derive(Debug, Clone)]
pub struct WaitInfo {
    pub req: u64,
    pub txn: u64,
    pub field: usize,
    pub wants: AccessMode,
    pub holders: Vec<(u64, AccessMode)>,
    pub ahead: Vec<u64>,
}

/// Aggregate counters; the engine sums them across instances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MonitorCounters {
    pub entry_calls: u64,
    pub field_visits: u64,
    pub blocks: u64,
    pub grants: u64,
    pub early_releases: u64,
}

#[derive(Debug)]
pub struct MonitorState {
    instance: Arc<str>,
    fields: Vec<FieldCtl>,
    requests: HashMap<u64, ReqState>,
    signals: Vec<u64>,
    counters: MonitorCounters,
}

impl MonitorState {
    pub fn new(instance: Arc<str>, dimension: usize) -> Self {
        MonitorState {
            instance,
            fields: (0..dimension).map(|_| FieldCtl::default()).collect(),
            requests: HashMap::new(),
            signals: Vec::new(),
            counters: MonitorCounters::default(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.fields.len()
    }

    pub fn counters(&self) -> MonitorCounters {
        self.counters
    }

    /// Reader-transaction count per field.
    pub fn read_vector(&self) -> Vec<u32> {
        self.fields.iter().map(|f| f.readers).collect()
    }

    /// Writer-present flag per field.
    pub fn write_vector(&self) -> Vec<bool> {
        self.fields.iter().map(|f| f.writer.is_some()).collect()
    }

    pub fn queue_len(&self, field: usize) -> usize {
        self.fields[field].queue.len()
    }

    /// Wake-ups produced since the last drain, in signal order.
    pub fn take_signals(&mut self) -> Vec<u64> {
        std::mem::take(&mut self.signals)
    }

    pub fn has_signals(&self) -> bool {
        !self.signals.is_empty()
    }

    /// Field-loop iterations performed so far for a live request's
    /// admission.
    pub fn admission_visits(&self, req: u64) -> u64 {
        self.requests.get(&req).map(|r| r.visits).unwrap_or(0)
    }

    /// Current per-transaction holdings, one access vector per transaction
    /// with any live contribution.
    pub fn txn_holdings(&self) -> HashMap<u64, AccessVector> {
        let mut out: HashMap<u64, AccessVector> = HashMap::new();
        for (i, f) in self.fields.iter().enumerate() {
            for (&txn, hold) in &f.holds {
                let m = hold.mode();
                if m != AccessMode::Null {
                    out.entry(txn)
                        .or_insert_with(|| AccessVector::null(self.fields.len()))
                        .upgrade(i, m);
                }
            }
        }
        out
    }

    /// Starts admission of a request claiming `vector`. Fields are
    /// acquired in ascending order; on a conflict the request is enqueued
    /// on the conflicting field and `Blocked` is returned.
    pub fn in_control(
        &mut self,
        req: u64,
        txn: u64,
        op: Arc<str>,
        vector: AccessVector,
        trace: &mut TraceBuf,
    ) -> Admission {
        assert_eq!(vector.len(), self.fields.len(), "vector/instance dimension");
        self.counters.entry_calls += 1;
        let dim = vector.len();
        let state = ReqState {
            txn,
            op,
            vector,
            current: vec![AccessMode::Null; dim],
            next_field: 0,
            blocked_at: None,
            admitted: false,
            visits: 0,
        };
        assert!(
            self.requests.insert(req, state).is_none(),
            "request id reused"
        );
        let adm = self.advance(req, trace);
        self.check_invariant();
        adm
    }

    /// Continues a request the waker has signalled. The waker already
    /// transferred the blocked field; a woken reader first offers the wake
    /// to the next queued entry iff that entry is also a reader.
    pub fn resume(&mut self, req: u64, trace: &mut TraceBuf) -> Admission {
        self.counters.entry_calls += 1;
        let state = self.requests.get_mut(&req).expect("resume of unknown request");
        let (field, kind) = state
            .blocked_at
            .take()
            .expect("resume of a request that was not blocked");
        state.next_field = field + 1;
        if kind == WaitKind::Reader {
            self.wake_head_if_eligible(field, trace);
        }
        let adm = self.advance(req, trace);
        self.check_invariant();
        adm
    }

    fn advance(&mut self, req: u64, trace: &mut TraceBuf) -> Admission {
        loop {
            let (i, done, mode, txn, op) = {
                let s = self.requests.get(&req).expect("unknown request");
                let i = s.next_field;
                let done = i >= s.vector.len();
                let mode = if done { AccessMode::Null } else { s.vector.get(i) };
                (i, done, mode, s.txn, Arc::clone(&s.op))
            };
            if done {
                self.requests.get_mut(&req).unwrap().admitted = true;
                return Admission::Granted;
            }
            self.requests.get_mut(&req).unwrap().visits += 1;
            self.counters.field_visits += 1;
            if mode == AccessMode::Null {
                self.requests.get_mut(&req).unwrap().next_field = i + 1;
                continue;
            }
            trace.push(txn, &op, &self.instance, req, EventKind::Request, i, mode);
            let field = &self.fields[i];
            let held = field
                .holds
                .get(&txn)
                .map(Hold::mode)
                .unwrap_or(AccessMode::Null);
            if mode <= held {
                // Transaction-level re-entrancy: already held at least this
                // strongly by the same transaction.
                self.fields[i].holds.get_mut(&txn).unwrap().add(mode);
                self.finish_grant(req, i, mode, trace);
                continue;
            }
            let wait = match (held, mode) {
                (AccessMode::Null, AccessMode::Read) => {
                    if field.writer.is_some() || !field.queue.is_empty() {
                        Some(WaitKind::Reader)
                    } else {
                        None
                    }
                }
                (AccessMode::Null, AccessMode::Write) => {
                    if field.writer.is_some() || field.readers > 0 || !field.queue.is_empty() {
                        Some(WaitKind::Writer)
                    } else {
                        None
                    }
                }
                (AccessMode::Read, AccessMode::Write) => {
                    debug_assert!(field.writer.is_none());
                    if field.readers == 1 {
                        None
                    } else {
                        Some(WaitKind::Upgrade)
                    }
                }
                (held, mode) => unreachable!("mode {mode:?} vs holding {held:?}"),
            };
            match wait {
                None => {
                    self.grant_field(req, txn, i, mode, trace);
                }
                Some(kind) => {
                    let entry = Waiting { req, txn, kind };
                    if kind == WaitKind::Upgrade {
                        self.fields[i].queue.push_front(entry);
                    } else {
                        self.fields[i].queue.push_back(entry);
                    }
                    self.requests.get_mut(&req).unwrap().blocked_at = Some((i, kind));
                    self.counters.blocks += 1;
                    trace.push(txn, &op, &self.instance, req, EventKind::Block, i, mode);
                    return Admission::Blocked { field: i };
                }
            }
        }
    }

    /// Acquires `mode` on field `i` for a transaction whose holding is
    /// currently below `mode`, updating the control counters.
    fn grant_field(&mut self, req: u64, txn: u64, i: usize, mode: AccessMode, trace: &mut TraceBuf) {
        let field = &mut self.fields[i];
        let hold = field.holds.entry(txn).or_default();
        let before = hold.mode();
        hold.add(mode);
        match (before, hold.mode()) {
            (AccessMode::Null, AccessMode::Read) => field.readers += 1,
            (AccessMode::Null, AccessMode::Write) => {
                debug_assert!(field.writer.is_none() && field.readers == 0);
                field.writer = Some(txn);
            }
            (AccessMode::Read, AccessMode::Write) => {
                // Upgrade: the transaction stops counting as a reader.
                debug_assert!(field.readers == 1 && field.writer.is_none());
                field.readers -= 1;
                field.writer = Some(txn);
            }
            transition => unreachable!("grant transition {transition:?}"),
        }
        self.finish_grant(req, i, mode, trace);
    }

    fn finish_grant(&mut self, req: u64, i: usize, mode: AccessMode, trace: &mut TraceBuf) {
        let state = self.requests.get_mut(&req).unwrap();
        state.current[i] = state.current[i].max(mode);
        state.next_field = i + 1;
        self.counters.grants += 1;
        let s = &self.requests[&req];
        trace.push(s.txn, &s.op, &self.instance, req, EventKind::Grant, i, mode);
    }

    /// Wakes the queue head iff the field can be transferred to it now.
    /// At most one entry is woken; reader chains continue from the woken
    /// reader's own `resume`.
    fn wake_head_if_eligible(&mut self, i: usize, trace: &mut TraceBuf) {
        let field = &self.fields[i];
        let Some(head) = field.queue.front() else {
            return;
        };
        let eligible = match head.kind {
            WaitKind::Reader => field.writer.is_none(),
            WaitKind::Writer => field.writer.is_none() && field.readers == 0,
            WaitKind::Upgrade => {
                field.writer.is_none()
                    && field.readers == 1
                    && field
                        .holds
                        .get(&head.txn)
                        .map(|h| h.mode() == AccessMode::Read)
                        .unwrap_or(false)
            }
        };
        if !eligible {
            return;
        }
        let entry = self.fields[i].queue.pop_front().unwrap();
        let mode = entry.kind.wanted_mode();
        self.grant_field(entry.req, entry.txn, i, mode, trace);
        self.signals.push(entry.req);
    }

    /// Downgrade pass after execution: replaces the request's granted
    /// static modes by the dynamic modes actually exercised, field by
    /// field in descending order, releasing whatever the transaction no
    /// longer needs.
    pub fn out_control(&mut self, req: u64, dynamic: &AccessVector, trace: &mut TraceBuf) -> u64 {
        self.counters.entry_calls += 1;
        let state = self.requests.get(&req).expect("out_control of unknown request");
        assert!(state.admitted, "out_control before admission completed");
        assert!(
            dynamic.leq(&state.vector).expect("dimension"),
            "dynamic vector exceeds static claim"
        );
        let dim = self.fields.len();
        let mut visits = 0u64;
        for i in (0..dim).rev() {
            visits += 1;
            self.counters.field_visits += 1;
            let state = self.requests.get(&req).unwrap();
            let old = state.current[i];
            let new = dynamic.get(i);
            if new == old {
                continue;
            }
            debug_assert!(new < old, "downgrade can only lower a mode");
            if self.replace_contribution(req, i, old, new, Reason::Downgrade, trace) {
                self.counters.early_releases += 1;
            }
        }
        self.check_invariant();
        visits
    }

    /// Terminal release at commit or reject: drops the request's remaining
    /// contributions in descending field order and forgets the request.
    pub fn commit_or_reject(&mut self, req: u64, trace: &mut TraceBuf) -> u64 {
        self.counters.entry_calls += 1;
        let state = self.requests.get(&req).expect("commit_or_reject of unknown request");
        assert!(state.admitted, "terminal release before admission completed");
        assert!(state.blocked_at.is_none());
        let dim = self.fields.len();
        let mut visits = 0u64;
        for i in (0..dim).rev() {
            visits += 1;
            self.counters.field_visits += 1;
            let old = self.requests.get(&req).unwrap().current[i];
            if old == AccessMode::Null {
                continue;
            }
            self.replace_contribution(req, i, old, AccessMode::Null, Reason::Terminal, trace);
        }
        self.requests.remove(&req);
        self.check_invariant();
        visits
    }

    /// Withdraws a request entirely: used when its transaction is chosen
    /// as a deadlock victim while blocked. The queue entry is removed and
    /// every field acquired so far is released.
    pub fn cancel(&mut self, req: u64, trace: &mut TraceBuf) {
        self.counters.entry_calls += 1;
        let Some(state) = self.requests.get(&req) else {
            return;
        };
        if let Some((field, _)) = state.blocked_at {
            let f = &mut self.fields[field];
            if let Some(pos) = f.queue.iter().position(|w| w.req == req) {
                f.queue.remove(pos);
            }
            // Removing a queue entry can expose a grantable head.
            self.wake_head_if_eligible(field, trace);
        }
        for i in (0..self.fields.len()).rev() {
            let old = self.requests.get(&req).unwrap().current[i];
            if old == AccessMode::Null {
                continue;
            }
            self.replace_contribution(req, i, old, AccessMode::Null, Reason::Terminal, trace);
        }
        self.requests.remove(&req);
        self.check_invariant();
    }

    /// Swaps one request's contribution on a field from `old` to `new`
    /// (with `new < old`), recomputes the owning transaction's holding,
    /// and performs whatever release or downgrade that implies. Returns
    /// whether the transaction's holding actually shrank.
    ///
    /// Event convention: an out-control reduction traces as `downgrade`
    /// carrying the *new* mode (`R` or `N`), a terminal release traces as
    /// `release` carrying the mode given up. The conflict-graph builder
    /// relies on this to recover each access's final dynamic mode.
    fn replace_contribution(
        &mut self,
        req: u64,
        i: usize,
        old: AccessMode,
        new: AccessMode,
        reason: Reason,
        trace: &mut TraceBuf,
    ) -> bool {
        let (txn, op) = {
            let s = &self.requests[&req];
            (s.txn, Arc::clone(&s.op))
        };
        let field = &mut self.fields[i];
        let hold = field.holds.get_mut(&txn).expect("contribution without holding");
        let before = hold.mode();
        hold.remove(old);
        hold.add(new);
        let after = hold.mode();
        if hold.is_empty() {
            field.holds.remove(&txn);
        }
        self.requests.get_mut(&req).unwrap().current[i] = new;
        if after == before {
            return false;
        }
        debug_assert!(after < before, "holdings only shrink here");
        let inst = Arc::clone(&self.instance);
        match (before, after) {
            (AccessMode::Write, AccessMode::Read) => {
                let field = &mut self.fields[i];
                debug_assert_eq!(field.writer, Some(txn));
                field.writer = None;
                field.readers += 1;
            }
            (AccessMode::Write, AccessMode::Null) => {
                let field = &mut self.fields[i];
                debug_assert_eq!(field.writer, Some(txn));
                field.writer = None;
            }
            (AccessMode::Read, AccessMode::Null) => {
                let field = &mut self.fields[i];
                debug_assert!(field.readers > 0);
                field.readers -= 1;
            }
            transition => unreachable!("release transition {transition:?}"),
        }
        match reason {
            Reason::Downgrade => {
                trace.push(txn, &op, &inst, req, EventKind::Downgrade, i, after);
            }
            Reason::Terminal => {
                trace.push(txn, &op, &inst, req, EventKind::Release, i, before);
            }
        }
        self.wake_head_if_eligible(i, trace);
        true
    }

    /// Blocked entries with enough context to build wait-for edges.
    pub fn wait_info(&self) -> Vec<WaitInfo> {
        let mut out = Vec::new();
        for (i, field) in self.fields.iter().enumerate() {
            let mut ahead: Vec<u64> = Vec::new();
            for w in &field.queue {
                let wants = w.kind.wanted_mode();
                let holders = field
                    .holds
                    .iter()
                    .filter_map(|(&txn, h)| {
                        let m = h.mode();
                        if txn != w.txn && m != AccessMode::Null && !m.compatible(wants) {
                            Some((txn, m))
                        } else {
                            None
                        }
                    })
                    .collect();
                out.push(WaitInfo {
                    req: w.req,
                    txn: w.txn,
                    field: i,
                    wants,
                    holders,
                    ahead: ahead.clone(),
                });
                ahead.push(w.txn);
            }
        }
        out
    }

    /// Per-field consistency: cached counters match the holdings, at most
    /// one writing transaction, and writers exclude readers. Runs after
    /// every entry-point call.
    pub fn check_invariant(&self) {
        for (i, field) in self.fields.iter().enumerate() {
            let mut readers = 0u32;
            let mut writers: Vec<u64> = Vec::new();
            for (&txn, hold) in &field.holds {
                match hold.mode() {
                    AccessMode::Read => readers += 1,
                    AccessMode::Write => writers.push(txn),
                    AccessMode::Null => panic!("empty holding retained on field {i}"),
                }
            }
            assert!(
                writers.len() <= 1,
                "field {i}: {} writing transactions",
                writers.len()
            );
            assert_eq!(field.readers, readers, "field {i}: reader count drifted");
            assert_eq!(
                field.writer,
                writers.first().copied(),
                "field {i}: writer flag drifted"
            );
            assert!(
                field.writer.is_none() || field.readers == 0,
                "field {i}: reader and writer coexist"
            );
        }
    }

    /// Stronger check for quiescent states (no undelivered signals): a
    /// non-empty queue implies its head still conflicts with the field.
    pub fn check_quiescent(&self) {
        assert!(self.signals.is_empty(), "quiescent check with signals pending");
        for (i, field) in self.fields.iter().enumerate() {
            if let Some(head) = field.queue.front() {
                let eligible = match head.kind {
                    WaitKind::Reader => field.writer.is_none(),
                    WaitKind::Writer => field.writer.is_none() && field.readers == 0,
                    WaitKind::Upgrade => {
                        field.writer.is_none()
                            && field.readers == 1
                            && field
                                .holds
                                .get(&head.txn)
                                .map(|h| h.mode() == AccessMode::Read)
                                .unwrap_or(false)
                    }
                };
                assert!(!eligible, "field {i}: grantable head left queued");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::access::AccessMode::{Null, Read, Write};
    use crate::trace::EventKind;

    fn av(modes: &[AccessMode]) -> AccessVector {
        AccessVector::new(modes.to_vec())
    }

    fn mon(dim: usize) -> MonitorState {
        MonitorState::new(Arc::from("inst"), dim)
    }

    fn name(s: &str) -> Arc<str> {
        Arc::from(s)
    }

    #[test]
    fn empty_monitor_grants_immediately() {
        let mut m = mon(2);
        let mut t = TraceBuf::new();
        let adm = m.in_control(1, 10, name("op"), av(&[Read, Write]), &mut t);
        assert_eq!(adm, Admission::Granted);
        assert_eq!(m.read_vector(), vec![1, 0]);
        assert_eq!(m.write_vector(), vec![false, true]);
    }

    #[test]
    fn writer_blocks_behind_reader() {
        let mut m = mon(2);
        let mut t = TraceBuf::new();
        assert_eq!(
            m.in_control(1, 10, name("r"), av(&[Read, Null]), &mut t),
            Admission::Granted
        );
        let adm = m.in_control(2, 11, name("w"), av(&[Write, Null]), &mut t);
        assert_eq!(adm, Admission::Blocked { field: 0 });
        assert_eq!(m.queue_len(0), 1);
        let info = m.wait_info();
        assert_eq!(info.len(), 1);
        assert_eq!(info[0].txn, 11);
        assert_eq!(info[0].wants, Write);
        assert_eq!(info[0].holders, vec![(10, Read)]);
    }

    #[test]
    fn release_wakes_head_and_cascades_readers_one_hop() {
        let mut m = mon(1);
        let mut t = TraceBuf::new();
        // Writer holds; two readers and one writer queue up in order.
        assert_eq!(
            m.in_control(1, 10, name("w0"), av(&[Write]), &mut t),
            Admission::Granted
        );
        assert_eq!(
            m.in_control(2, 11, name("r1"), av(&[Read]), &mut t),
            Admission::Blocked { field: 0 }
        );
        assert_eq!(
            m.in_control(3, 12, name("r2"), av(&[Read]), &mut t),
            Admission::Blocked { field: 0 }
        );
        assert_eq!(
            m.in_control(4, 13, name("w1"), av(&[Write]), &mut t),
            Admission::Blocked { field: 0 }
        );
        // Holder commits: only the first reader is woken directly.
        m.commit_or_reject(1, &mut t);
        assert_eq!(m.take_signals(), vec![2]);
        assert_eq!(m.read_vector(), vec![1]);
        // The woken reader resumes and wakes the next reader, not the writer.
        assert_eq!(m.resume(2, &mut t), Admission::Granted);
        assert_eq!(m.take_signals(), vec![3]);
        assert_eq!(m.resume(3, &mut t), Admission::Granted);
        assert!(m.take_signals().is_empty());
        assert_eq!(m.read_vector(), vec![2]);
        assert_eq!(m.queue_len(0), 1);
        // Readers leave; the writer finally gets the field.
        m.commit_or_reject(2, &mut t);
        assert!(m.take_signals().is_empty());
        m.commit_or_reject(3, &mut t);
        assert_eq!(m.take_signals(), vec![4]);
        assert_eq!(m.resume(4, &mut t), Admission::Granted);
        assert_eq!(m.write_vector(), vec![true]);
    }

    #[test]
    fn per_field_fifo_late_reader_waits_behind_writer() {
        let mut m = mon(1);
        let mut t = TraceBuf::new();
        assert_eq!(
            m.in_control(1, 10, name("r1"), av(&[Read]), &mut t),
            Admission::Granted
        );
        assert_eq!(
            m.in_control(2, 11, name("r2"), av(&[Read]), &mut t),
            Admission::Granted
        );
        assert_eq!(
            m.in_control(3, 12, name("w"), av(&[Write]), &mut t),
            Admission::Blocked { field: 0 }
        );
        // A third reader arrives while the writer queues: it must wait.
        assert_eq!(
            m.in_control(4, 13, name("r3"), av(&[Read]), &mut t),
            Admission::Blocked { field: 0 }
        );
        m.commit_or_reject(1, &mut t);
        assert!(m.take_signals().is_empty());
        m.commit_or_reject(2, &mut t);
        // Writer granted strictly before the later reader.
        assert_eq!(m.take_signals(), vec![3]);
        assert_eq!(m.resume(3, &mut t), Admission::Granted);
        m.commit_or_reject(3, &mut t);
        assert_eq!(m.take_signals(), vec![4]);
        assert_eq!(m.resume(4, &mut t), Admission::Granted);
    }

    #[test]
    fn downgrade_write_to_read_admits_waiting_reader_before_commit() {
        let mut m = mon(2);
        let mut t = TraceBuf::new();
        assert_eq!(
            m.in_control(1, 10, name("cap"), av(&[Write, Read]), &mut t),
            Admission::Granted
        );
        assert_eq!(
            m.in_control(2, 11, name("get"), av(&[Read, Null]), &mut t),
            Admission::Blocked { field: 0 }
        );
        // Execution touched field 1 read-only; the write claim is dropped.
        let visits = m.out_control(1, &av(&[Read, Read]), &mut t);
        assert_eq!(visits, 2);
        assert_eq!(m.take_signals(), vec![2]);
        assert_eq!(m.read_vector(), vec![2, 1]);
        assert_eq!(m.write_vector(), vec![false, false]);
        assert!(t
            .events()
            .iter()
            .any(|e| e.event == EventKind::Downgrade && e.field == 0 && e.mode == Read));
        assert_eq!(m.counters().early_releases, 1);
        assert_eq!(m.resume(2, &mut t), Admission::Granted);
    }

    #[test]
    fn out_control_with_equal_vectors_changes_nothing() {
        let mut m = mon(2);
        let mut t = TraceBuf::new();
        m.in_control(1, 10, name("op"), av(&[Write, Read]), &mut t);
        let before_events = t.len();
        m.out_control(1, &av(&[Write, Read]), &mut t);
        assert_eq!(t.len(), before_events);
        assert_eq!(m.read_vector(), vec![0, 1]);
        assert_eq!(m.write_vector(), vec![true, false]);
        assert_eq!(m.counters().early_releases, 0);
    }

    #[test]
    fn out_control_full_release_of_untouched_write() {
        let mut m = mon(2);
        let mut t = TraceBuf::new();
        m.in_control(1, 10, name("op"), av(&[Write, Null]), &mut t);
        m.out_control(1, &av(&[Null, Null]), &mut t);
        assert_eq!(m.read_vector(), vec![0, 0]);
        assert_eq!(m.write_vector(), vec![false, false]);
        // Terminal release is then a no-op sweep.
        m.commit_or_reject(1, &mut t);
        assert_eq!(m.read_vector(), vec![0, 0]);
    }

    #[test]
    fn reentrant_same_transaction_does_not_block() {
        let mut m = mon(1);
        let mut t = TraceBuf::new();
        assert_eq!(
            m.in_control(1, 10, name("dep"), av(&[Write]), &mut t),
            Admission::Granted
        );
        // Same transaction, second operation: read under its own write.
        assert_eq!(
            m.in_control(2, 10, name("get"), av(&[Read]), &mut t),
            Admission::Granted
        );
        assert_eq!(m.write_vector(), vec![true]);
        assert_eq!(m.read_vector(), vec![0]);
        // Releasing the write leaves the read contribution standing.
        m.commit_or_reject(1, &mut t);
        assert_eq!(m.write_vector(), vec![false]);
        assert_eq!(m.read_vector(), vec![1]);
        m.commit_or_reject(2, &mut t);
        assert_eq!(m.read_vector(), vec![0]);
    }

    #[test]
    fn upgrade_waits_until_sole_reader() {
        let mut m = mon(1);
        let mut t = TraceBuf::new();
        assert_eq!(
            m.in_control(1, 10, name("get"), av(&[Read]), &mut t),
            Admission::Granted
        );
        assert_eq!(
            m.in_control(2, 11, name("get"), av(&[Read]), &mut t),
            Admission::Granted
        );
        // Transaction 10 upgrades: must wait for 11 to leave.
        assert_eq!(
            m.in_control(3, 10, name("set"), av(&[Write]), &mut t),
            Admission::Blocked { field: 0 }
        );
        m.commit_or_reject(2, &mut t);
        assert_eq!(m.take_signals(), vec![3]);
        assert_eq!(m.resume(3, &mut t), Admission::Granted);
        assert_eq!(m.write_vector(), vec![true]);
        assert_eq!(m.read_vector(), vec![0]);
        // Both of transaction 10's operations release; field frees fully.
        m.commit_or_reject(3, &mut t);
        assert_eq!(m.write_vector(), vec![false]);
        assert_eq!(m.read_vector(), vec![1]);
        m.commit_or_reject(1, &mut t);
        assert_eq!(m.read_vector(), vec![0]);
    }

    #[test]
    fn upgrade_queues_at_front() {
        let mut m = mon(1);
        let mut t = TraceBuf::new();
        m.in_control(1, 10, name("get"), av(&[Read]), &mut t);
        m.in_control(2, 11, name("get"), av(&[Read]), &mut t);
        // A plain writer queues first, then 10's upgrade jumps ahead.
        assert_eq!(
            m.in_control(3, 12, name("w"), av(&[Write]), &mut t),
            Admission::Blocked { field: 0 }
        );
        assert_eq!(
            m.in_control(4, 10, name("set"), av(&[Write]), &mut t),
            Admission::Blocked { field: 0 }
        );
        m.commit_or_reject(2, &mut t);
        // The upgrade is served before the earlier writer.
        assert_eq!(m.take_signals(), vec![4]);
        assert_eq!(m.resume(4, &mut t), Admission::Granted);
        assert_eq!(m.write_vector(), vec![true]);
    }

    #[test]
    fn cancel_unwinds_partial_admission_and_wakes() {
        let mut m = mon(2);
        let mut t = TraceBuf::new();
        // Victim acquires field 1 then blocks on field 2.
        m.in_control(1, 10, name("a"), av(&[Null, Write]), &mut t);
        assert_eq!(
            m.in_control(2, 11, name("b"), av(&[Write, Write]), &mut t),
            Admission::Blocked { field: 1 }
        );
        // A third party queues behind the victim on field 1.
        assert_eq!(
            m.in_control(3, 12, name("c"), av(&[Write, Null]), &mut t),
            Admission::Blocked { field: 0 }
        );
        m.cancel(2, &mut t);
        // Victim's held field 1 is released; the queued writer is woken.
        assert_eq!(m.take_signals(), vec![3]);
        assert_eq!(m.resume(3, &mut t), Admission::Granted);
        assert_eq!(m.write_vector(), vec![true, true]);
        assert_eq!(m.queue_len(0), 0);
        assert_eq!(m.queue_len(1), 0);
    }

    #[test]
    fn admission_visits_each_field_exactly_once() {
        for dim in [1usize, 4, 16, 64] {
            let mut m = mon(dim);
            let mut t = TraceBuf::new();
            // Seed contention: another transaction writes the middle field
            // and a stranger queues behind it.
            let mid = dim / 2;
            let mut holder = AccessVector::null(dim);
            holder.set(mid, Write);
            m.in_control(1, 1, name("h"), holder.clone(), &mut t);
            m.in_control(2, 2, name("q"), holder, &mut t);
            // The probe claims every field and blocks at the contended one.
            let probe = av(&vec![Read; dim]);
            let adm = m.in_control(3, 3, name("probe"), probe, &mut t);
            assert_eq!(adm, Admission::Blocked { field: mid });
            m.commit_or_reject(1, &mut t);
            // Queued writer first (FIFO), then the probe.
            assert_eq!(m.take_signals(), vec![2]);
            m.resume(2, &mut t);
            m.commit_or_reject(2, &mut t);
            assert_eq!(m.take_signals(), vec![3]);
            assert_eq!(m.resume(3, &mut t), Admission::Granted);
            assert_eq!(m.admission_visits(3), dim as u64);
            let visits = m.out_control(3, &AccessVector::null(dim), &mut t);
            assert_eq!(visits, dim as u64);
            let visits = m.commit_or_reject(3, &mut t);
            assert_eq!(visits, dim as u64);
        }
    }

    #[test]
    fn granted_bag_stays_pairwise_commutative() {
        let mut m = mon(3);
        let mut t = TraceBuf::new();
        m.in_control(1, 10, name("a"), av(&[Write, Null, Read]), &mut t);
        m.in_control(2, 11, name("b"), av(&[Null, Write, Read]), &mut t);
        m.in_control(3, 12, name("c"), av(&[Null, Null, Read]), &mut t);
        let holdings: Vec<AccessVector> = m.txn_holdings().into_values().collect();
        let bag = crate::access::OperationBag::new(holdings).unwrap();
        assert!(bag.is_pairwise_commutative());
        assert!(bag.control_vectors().is_conflict_free());
    }
}
