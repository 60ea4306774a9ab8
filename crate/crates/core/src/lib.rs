//! Field-granularity concurrency control and undo recovery for tuple-based
//! abstract data types.
//!
//! Operations on a tuple ADT are summarised at compile time by per-field
//! access vectors over `Null < Read < Write`. Componentwise compatibility
//! of the vectors (*strong commutativity*) is enough to run operations in
//! full parallelism; a per-instance monitor admits operations by their
//! vectors, downgrades them to the access pattern actually observed at run
//! time, and logs field-projected before-images so a rejected transaction
//! is undone by restoring exactly the fields it wrote.
//!
//! Crate layout:
//!
//! * [`access`] — modes, vectors, control vectors, and commutativity.
//! * [`dsl`] — the `.adt` operation language and static vector inference.
//! * [`interp`] — execution with dynamic vectors and before-images.
//! * [`monitor`] — the per-instance scheduler state machine.
//! * [`txn`] — transactions, strict two-phase locking, undo, deadlocks.
//! * [`oracle`] — serializability checking by serial enumeration.
//! * [`harness`] — workload files, generators, and the two run drivers.

pub mod access;
pub mod dsl;
pub mod harness;
pub mod interp;
pub mod monitor;
pub mod oracle;
pub mod trace;
pub mod txn;
pub mod value;

pub use access::{AccessMode, AccessVector, ControlVectors, OperationBag};
pub use dsl::{AdtDecl, AdtSchema, OperationDef};
pub use interp::{ExecOutcome, ExecutionRecord};
pub use txn::{Engine, SchedulerMode, TxnError, TxnId, TxnStatus};
pub use value::{FieldType, Value};
