//! Ground-truth serializability checking.
//!
//! The oracle replays a workload's committed transactions under *every*
//! serial order and asks whether an observed concurrent outcome equals one
//! of them — final-state plus returned-values equivalence, which is
//! stricter than conflict equivalence and decidable at desk scale. A
//! field-level conflict graph over a scheduler trace gives the independent
//! second route: acyclicity implies serializability.

mod workload;

pub use workload::{
    memory_loader, parse_workload, InstanceDecl, OpCall, TxnScript, Workload, WorkloadError,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::access::AccessMode;
use crate::interp::{self, PlainStore};
use crate::trace::{EventKind, TraceEvent};
use crate::value::Value;

/// What a run produced: the final field values of every instance, each
/// committed transaction's return values, and which transactions
/// committed. Rejected transactions must leave no mark.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Outcome {
    pub committed: BTreeSet<usize>,
    pub finals: BTreeMap<String, Vec<Value>>,
    pub returns: BTreeMap<usize, Vec<Option<Value>>>,
    /// A serial replay that faulted; never equal to a real outcome.
    pub faulted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("permutation bound exceeded: {0} committed transactions (limit 6)")]
    BoundExceeded(usize),
}

const PERMUTATION_LIMIT: usize = 6;

/// Replays transactions serially in the given order from the workload's
/// initial state. Execution stops at the first fault.
pub fn replay_serial(w: &Workload, order: &[usize]) -> Outcome {
    let stores: BTreeMap<&str, PlainStore> = w
        .instances
        .iter()
        .map(|i| (i.name.as_str(), PlainStore::new(i.init.clone())))
        .collect();
    let mut returns: BTreeMap<usize, Vec<Option<Value>>> = BTreeMap::new();
    let mut faulted = false;
    'txns: for &ti in order {
        let script = &w.txns[ti];
        let rets = returns.entry(ti).or_default();
        for step in &script.steps {
            let decl = w.decl_of(&step.instance).expect("validated workload");
            let op = decl.op(&step.op).expect("validated workload");
            let store = &stores[step.instance.as_str()];
            let out = interp::execute(op, &step.args, store);
            if out.fault.is_some() {
                faulted = true;
                break 'txns;
            }
            rets.push(out.record.ret);
        }
    }
    Outcome {
        committed: order.iter().copied().collect(),
        finals: stores
            .into_iter()
            .map(|(name, s)| (name.to_string(), s.values()))
            .collect(),
        returns,
        faulted,
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, x);
            out.push(tail);
        }
    }
    out
}

/// Every outcome reachable by running the committed transactions in some
/// serial order; duplicates collapse.
pub fn serial_outcomes(
    w: &Workload,
    committed: &BTreeSet<usize>,
) -> Result<BTreeSet<Outcome>, OracleError> {
    if committed.len() > PERMUTATION_LIMIT {
        return Err(OracleError::BoundExceeded(committed.len()));
    }
    let items: Vec<usize> = committed.iter().copied().collect();
    Ok(permutations(&items)
        .into_iter()
        .map(|order| replay_serial(w, &order))
        .collect())
}

/// True iff the observed outcome equals some serial execution of its own
/// committed set.
pub fn check_serializable(w: &Workload, observed: &Outcome) -> Result<bool, OracleError> {
    Ok(serial_outcomes(w, &observed.committed)?.contains(observed))
}

/// Field-level conflict graph over transaction identifiers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConflictGraph {
    pub nodes: BTreeSet<u64>,
    pub edges: BTreeSet<(u64, u64)>,
}

impl ConflictGraph {
    pub fn is_acyclic(&self) -> bool {
        // Kahn's algorithm over the edge set.
        let mut indegree: BTreeMap<u64, usize> = self.nodes.iter().map(|&n| (n, 0)).collect();
        for &(_, to) in &self.edges {
            *indegree.get_mut(&to).expect("edge endpoints are nodes") += 1;
        }
        let mut ready: Vec<u64> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&n, _)| n)
            .collect();
        let mut seen = 0usize;
        while let Some(n) = ready.pop() {
            seen += 1;
            for &(from, to) in &self.edges {
                if from == n {
                    let d = indegree.get_mut(&to).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        ready.push(to);
                    }
                }
            }
        }
        seen == self.nodes.len()
    }
}

/// Builds the conflict graph from a scheduler trace: an edge `T -> T'`
/// whenever `T`'s access to some (instance, field) conflicts, under the
/// final dynamic modes, with a later-granted access by `T'`. A `grant`
/// fixes an access's mode; `downgrade` events lower it (a downgrade to
/// `N` means the access never materialised).
pub fn conflict_graph(events: &[TraceEvent]) -> ConflictGraph {
    struct Access {
        txn: u64,
        grant_seq: u64,
        mode: AccessMode,
    }
    let mut accesses: HashMap<(String, usize, u64), Access> = HashMap::new();
    let mut nodes = BTreeSet::new();
    for e in events {
        nodes_insert(&mut nodes, e);
        let key = (e.instance.to_string(), e.field, e.req);
        match e.event {
            EventKind::Grant => {
                accesses.insert(
                    key,
                    Access {
                        txn: e.txn,
                        grant_seq: e.seq,
                        mode: e.mode,
                    },
                );
            }
            EventKind::Downgrade => {
                if let Some(a) = accesses.get_mut(&key) {
                    a.mode = e.mode;
                }
            }
            _ => {}
        }
    }
    let mut per_field: BTreeMap<(String, usize), Vec<&Access>> = BTreeMap::new();
    for ((inst, field, _), a) in &accesses {
        per_field.entry((inst.clone(), *field)).or_default().push(a);
    }
    let mut edges = BTreeSet::new();
    for list in per_field.values_mut() {
        list.sort_by_key(|a| a.grant_seq);
        for i in 0..list.len() {
            for j in i + 1..list.len() {
                let (a, b) = (list[i], list[j]);
                if a.txn != b.txn && !a.mode.compatible(b.mode) {
                    edges.insert((a.txn, b.txn));
                }
            }
        }
    }
    ConflictGraph { nodes, edges }
}

fn nodes_insert(nodes: &mut BTreeSet<u64>, e: &TraceEvent) {
    nodes.insert(e.txn);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::parse_trace;
    use std::collections::HashMap as StdHashMap;

    const PAIR_ADT: &str = "\
adt Pair(a: integer, b: integer)
op setA(v: integer) { a := v }
op setB(v: integer) { b := v }
op addA(v: integer) { a := a + v }
op getA() -> integer { return a }
";

    fn workload(txns: &str) -> Workload {
        let mut files = StdHashMap::new();
        files.insert("pair.adt".to_string(), PAIR_ADT.to_string());
        let src = format!("use pair.adt\ninstance p: Pair(a=0, b=0)\n{txns}");
        parse_workload(&src, &mut memory_loader(files)).unwrap()
    }

    #[test]
    fn disjoint_writers_collapse_to_one_outcome() {
        let w = workload("txn t1 { p.setA(1); }\ntxn t2 { p.setB(2); }");
        let committed: BTreeSet<usize> = [0, 1].into();
        let outcomes = serial_outcomes(&w, &committed).unwrap();
        assert_eq!(outcomes.len(), 1);
        let only = outcomes.iter().next().unwrap();
        assert_eq!(only.finals["p"], vec![Value::Int(1), Value::Int(2)]);
    }

    #[test]
    fn empty_committed_set_is_initial_state() {
        let w = workload("txn t1 { p.setA(1); }");
        let outcomes = serial_outcomes(&w, &BTreeSet::new()).unwrap();
        assert_eq!(outcomes.len(), 1);
        let only = outcomes.iter().next().unwrap();
        assert_eq!(only.finals["p"], vec![Value::Int(0), Value::Int(0)]);
        assert!(only.returns.is_empty());
    }

    #[test]
    fn commuting_increments_collapse_but_conflicting_writes_do_not() {
        let w = workload("txn t1 { p.addA(1); }\ntxn t2 { p.addA(2); }");
        let committed: BTreeSet<usize> = [0, 1].into();
        // Addition commutes semantically even though the writes conflict.
        let outcomes = serial_outcomes(&w, &committed).unwrap();
        assert_eq!(outcomes.len(), 1);
        assert_eq!(
            outcomes.iter().next().unwrap().finals["p"],
            vec![Value::Int(3), Value::Int(0)]
        );

        let w = workload("txn t1 { p.setA(1); }\ntxn t2 { p.setA(2); }");
        let outcomes = serial_outcomes(&w, &committed).unwrap();
        assert_eq!(outcomes.len(), 2);
    }

    #[test]
    fn single_transaction_outcome_is_serializable() {
        let w = workload("txn t1 { p.setA(1); p.getA(); }");
        let observed = replay_serial(&w, &[0]);
        assert!(check_serializable(&w, &observed).unwrap());
    }

    #[test]
    fn lost_update_is_flagged() {
        let w = workload("txn t1 { p.addA(1); }\ntxn t2 { p.addA(2); }");
        // Hand-built lost update: both incremented from the same base, one
        // increment overwritten.
        let mut bogus = replay_serial(&w, &[0, 1]);
        bogus.finals.insert("p".into(), vec![Value::Int(2), Value::Int(0)]);
        assert!(!check_serializable(&w, &bogus).unwrap());
    }

    #[test]
    fn bound_is_enforced() {
        let w = workload(
            "txn t1 {}\ntxn t2 {}\ntxn t3 {}\ntxn t4 {}\ntxn t5 {}\ntxn t6 {}\ntxn t7 {}",
        );
        let committed: BTreeSet<usize> = (0..7).collect();
        assert_eq!(
            serial_outcomes(&w, &committed),
            Err(OracleError::BoundExceeded(7))
        );
    }

    #[test]
    fn conflict_graph_read_read_has_no_edge() {
        let text = "\
seq=0 txn=1 op=g inst=p req=0 event=grant field=1 mode=R
seq=1 txn=2 op=g inst=p req=1 event=grant field=1 mode=R
";
        let g = conflict_graph(&parse_trace(text).unwrap());
        assert!(g.edges.is_empty());
        assert!(g.is_acyclic());
    }

    #[test]
    fn conflict_graph_writer_then_reader_has_one_edge() {
        let text = "\
seq=0 txn=1 op=w inst=p req=0 event=grant field=1 mode=W
seq=5 txn=2 op=r inst=p req=1 event=grant field=1 mode=R
";
        let g = conflict_graph(&parse_trace(text).unwrap());
        assert_eq!(g.edges.iter().collect::<Vec<_>>(), vec![&(1u64, 2u64)]);
    }

    #[test]
    fn downgraded_write_conflicts_as_read() {
        let text = "\
seq=0 txn=1 op=cap inst=p req=0 event=grant field=1 mode=W
seq=1 txn=1 op=cap inst=p req=0 event=downgrade field=1 mode=R
seq=2 txn=2 op=get inst=p req=1 event=grant field=1 mode=R
";
        let g = conflict_graph(&parse_trace(text).unwrap());
        assert!(g.edges.is_empty());
    }

    #[test]
    fn cycle_is_detected() {
        let g = ConflictGraph {
            nodes: [1, 2].into(),
            edges: [(1, 2), (2, 1)].into(),
        };
        assert!(!g.is_acyclic());
    }
}
