//! Transactions: strict two-phase locking at the transaction level, the
//! field-projected undo log, reject handling, and deadlock detection.
//!
//! An operation runs in three steps — admission, execution, downgrade —
//! and its remaining holdings are released only when its transaction
//! commits or is rejected. Rejection applies the universal inverse
//! (before-image restoration) to every executed operation in reverse
//! order, without any monitor interaction, and only then releases.

mod engine;

pub use engine::{Engine, EngineCounters, EngineState};
pub(crate) use engine::FinishOutcome;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::access::AccessVector;
use crate::dsl::AdtSchema;
use crate::interp::ExecFault;
use crate::value::Value;

/// Transaction identifier; also the start order (identifiers are handed
/// out monotonically), which deadlock victim selection relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxnId(pub u64);

impl fmt::Display for TxnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxnStatus {
    Active,
    Committed,
    Rejected,
}

impl fmt::Display for TxnStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TxnStatus::Active => "active",
            TxnStatus::Committed => "committed",
            TxnStatus::Rejected => "rejected",
        })
    }
}

/// Scheduler granularity. `Compat` collapses every vector to a whole-object
/// reader/writer mode, `StaticAv` admits by per-field static vectors, and
/// `DynamicAv` additionally downgrades to the observed dynamic vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerMode {
    Compat,
    StaticAv,
    DynamicAv,
}

impl SchedulerMode {
    pub const ALL: [SchedulerMode; 3] = [
        SchedulerMode::Compat,
        SchedulerMode::StaticAv,
        SchedulerMode::DynamicAv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerMode::Compat => "compat",
            SchedulerMode::StaticAv => "static-av",
            SchedulerMode::DynamicAv => "dynamic-av",
        }
    }
}

impl fmt::Display for SchedulerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "compat" => Ok(SchedulerMode::Compat),
            "static-av" => Ok(SchedulerMode::StaticAv),
            "dynamic-av" => Ok(SchedulerMode::DynamicAv),
            other => Err(format!(
                "unknown mode `{other}` (expected compat, static-av, or dynamic-av)"
            )),
        }
    }
}

/// One undo-log record: the fields an execution actually modified, with
/// their prior values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub txn: TxnId,
    pub instance: Arc<str>,
    pub op: String,
    pub before_image: BTreeMap<usize, Value>,
    pub dynamic_dav: AccessVector,
}

impl LogRecord {
    /// Stable line form: `LOG <txn> <instance> <op> <field>=<old-value> ...`
    /// with fields in ascending schema order.
    pub fn to_line(&self, schema: &AdtSchema) -> String {
        let mut line = format!("LOG {} {} {}", self.txn, self.instance, self.op);
        for (&field, value) in &self.before_image {
            line.push(' ');
            line.push_str(schema.field_name(field));
            line.push('=');
            line.push_str(&value.to_string());
        }
        line
    }
}

/// A blocked-on relationship observed by the deadlock detector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaitForEdge {
    pub waiter: TxnId,
    pub holder: TxnId,
    pub instance: Arc<str>,
    pub field: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TxnError {
    #[error("unknown transaction {0}")]
    UnknownTxn(TxnId),
    #[error("transaction {txn} is already {status}")]
    NotActive { txn: TxnId, status: TxnStatus },
    #[error("unknown ADT `{0}`")]
    UnknownAdt(String),
    #[error("duplicate ADT `{0}`")]
    DuplicateAdt(String),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("duplicate instance `{0}`")]
    DuplicateInstance(String),
    #[error("unknown operation `{op}` on ADT `{adt}`")]
    UnknownOperation { adt: String, op: String },
    #[error("{0}")]
    BadArguments(String),
    #[error("transaction {0} rejected as deadlock victim")]
    DeadlockVictim(TxnId),
    #[error("transaction {txn} rejected after execution fault: {fault}")]
    ExecutionFault { txn: TxnId, fault: ExecFault },
}
