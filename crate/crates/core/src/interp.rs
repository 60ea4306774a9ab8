//! Operation execution with run-time access instrumentation.
//!
//! Executing a body builds a *dynamic* access vector alongside the result:
//! every field starts at `Null`, is raised to `Read` the first time it is
//! used in an expression, and to `Write` the first time it is assigned.
//! `Write` is never demoted — a later read of a field the operation already
//! wrote keeps it at `Write`. The value a field held just before its first
//! write is captured as a before-image; restoring the before-images is a
//! universal inverse whose own access vector (`Write` exactly on the
//! captured fields) never exceeds the dynamic vector.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Mutex;

use thiserror::Error;

use crate::access::{AccessMode, AccessVector};
use crate::dsl::{BinaryOp, Block, Expr, OperationDef, Stmt, UnaryOp};
use crate::value::{FieldType, Value};

/// Field storage an execution runs against. Loads and stores touch one
/// field at a time; the scheduler guarantees that concurrent executions on
/// the same instance only ever overlap compatibly.
pub trait FieldStore {
    fn dimension(&self) -> usize;
    fn load(&self, field: usize) -> Value;
    /// Stores a value and returns the previous one.
    fn store(&self, field: usize, value: Value) -> Value;
}

/// Single-threaded storage for serial replay and tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainStore(RefCell<Vec<Value>>);

impl PlainStore {
    pub fn new(values: Vec<Value>) -> Self {
        PlainStore(RefCell::new(values))
    }

    pub fn values(&self) -> Vec<Value> {
        self.0.borrow().clone()
    }
}

impl FieldStore for PlainStore {
    fn dimension(&self) -> usize {
        self.0.borrow().len()
    }

    fn load(&self, field: usize) -> Value {
        self.0.borrow()[field].clone()
    }

    fn store(&self, field: usize, value: Value) -> Value {
        std::mem::replace(&mut self.0.borrow_mut()[field], value)
    }
}

/// Shared storage with one lock per field, so commuting executions touch
/// disjoint or read-only fields in true parallelism. A lock is held only
/// for the moment of a single load or store.
#[derive(Debug)]
pub struct SharedStore(Vec<Mutex<Value>>);

impl SharedStore {
    pub fn new(values: Vec<Value>) -> Self {
        SharedStore(values.into_iter().map(Mutex::new).collect())
    }

    pub fn values(&self) -> Vec<Value> {
        self.0.iter().map(|m| m.lock().unwrap().clone()).collect()
    }
}

impl FieldStore for SharedStore {
    fn dimension(&self) -> usize {
        self.0.len()
    }

    fn load(&self, field: usize) -> Value {
        self.0[field].lock().unwrap().clone()
    }

    fn store(&self, field: usize, value: Value) -> Value {
        std::mem::replace(&mut *self.0[field].lock().unwrap(), value)
    }
}

/// A fault raised while evaluating a body. The transaction layer treats any
/// fault as a reject trigger; the partial record still carries everything
/// needed to undo what already ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ExecFault {
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
}

/// What one execution did: the modes it actually exercised and the prior
/// values of the fields it wrote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionRecord {
    pub op_name: String,
    pub args: Vec<Value>,
    pub ret: Option<Value>,
    pub dynamic_dav: AccessVector,
    /// Field index -> value before this execution's first write to it.
    pub before_image: BTreeMap<usize, Value>,
}

impl ExecutionRecord {
    /// Access vector of the inverse: `Write` exactly where a before-image
    /// was captured.
    pub fn inverse_vector(&self) -> AccessVector {
        let mut v = AccessVector::null(self.dynamic_dav.len());
        for &i in self.before_image.keys() {
            v.set(i, AccessMode::Write);
        }
        v
    }
}

/// Result of [`execute`]: the record is present even when the body faulted
/// part-way, so the caller can always roll back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecOutcome {
    pub record: ExecutionRecord,
    pub fault: Option<ExecFault>,
}

impl ExecOutcome {
    pub fn is_ok(&self) -> bool {
        self.fault.is_none()
    }
}

struct ExecCtx<'a> {
    args: &'a [Value],
    store: &'a dyn FieldStore,
    locals: Vec<Value>,
    dynamic: AccessVector,
    before: BTreeMap<usize, Value>,
}

impl ExecCtx<'_> {
    fn read_field(&mut self, i: usize) -> Value {
        self.dynamic.upgrade(i, AccessMode::Read);
        self.store.load(i)
    }

    fn write_field(&mut self, i: usize, v: Value) {
        let old = self.store.store(i, v);
        if self.dynamic.get(i) != AccessMode::Write {
            self.dynamic.set(i, AccessMode::Write);
            self.before.insert(i, old);
        }
    }
}

enum Flow {
    Continue,
    Return(Value),
}

/// Runs an operation body against a store. `args` must already conform to
/// the operation's parameter types.
pub fn execute(op: &OperationDef, args: &[Value], store: &dyn FieldStore) -> ExecOutcome {
    debug_assert_eq!(op.params.len(), args.len());
    debug_assert!(op
        .params
        .iter()
        .zip(args)
        .all(|(p, a)| p.ty == a.ty()));
    let mut ctx = ExecCtx {
        args,
        store,
        locals: op
            .locals
            .iter()
            .map(|l| Value::default_of(l.ty))
            .collect(),
        dynamic: AccessVector::null(store.dimension()),
        before: BTreeMap::new(),
    };
    let (ret, fault) = match run_block(&mut ctx, &op.body) {
        Ok(Flow::Return(v)) => (Some(v), None),
        Ok(Flow::Continue) => (None, None),
        Err(f) => (None, Some(f)),
    };
    ExecOutcome {
        record: ExecutionRecord {
            op_name: op.name.clone(),
            args: args.to_vec(),
            ret,
            dynamic_dav: ctx.dynamic,
            before_image: ctx.before,
        },
        fault,
    }
}

fn run_block(ctx: &mut ExecCtx<'_>, block: &Block) -> Result<Flow, ExecFault> {
    for stmt in &block.0 {
        match stmt {
            Stmt::FieldAssign { field, expr } => {
                let v = eval(ctx, expr)?;
                ctx.write_field(*field, v);
            }
            Stmt::LocalAssign { local, expr } => {
                ctx.locals[*local] = eval(ctx, expr)?;
            }
            Stmt::Return(expr) => {
                let v = eval(ctx, expr)?;
                return Ok(Flow::Return(v));
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let c = eval(ctx, cond)?.as_bool().expect("type-checked condition");
                let branch = if c {
                    Some(then_branch)
                } else {
                    else_branch.as_ref()
                };
                if let Some(b) = branch {
                    if let Flow::Return(v) = run_block(ctx, b)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
        }
    }
    Ok(Flow::Continue)
}

fn eval(ctx: &mut ExecCtx<'_>, expr: &Expr) -> Result<Value, ExecFault> {
    Ok(match expr {
        Expr::Literal(v) => v.clone(),
        Expr::Field(i) => ctx.read_field(*i),
        Expr::Param(i) => ctx.args[*i].clone(),
        Expr::Local(i) => ctx.locals[*i].clone(),
        Expr::Unary { op, operand } => {
            let v = eval(ctx, operand)?;
            match op {
                UnaryOp::Neg => Value::Int(
                    v.as_int()
                        .expect("type-checked operand")
                        .checked_neg()
                        .ok_or(ExecFault::Overflow)?,
                ),
                UnaryOp::Not => Value::Bool(!v.as_bool().expect("type-checked operand")),
            }
        }
        Expr::Binary { op, left, right } => {
            // `and`/`or` short-circuit; everything else is strict.
            match op {
                BinaryOp::And => {
                    let l = eval(ctx, left)?.as_bool().expect("type-checked operand");
                    return if l {
                        eval(ctx, right)
                    } else {
                        Ok(Value::Bool(false))
                    };
                }
                BinaryOp::Or => {
                    let l = eval(ctx, left)?.as_bool().expect("type-checked operand");
                    return if l {
                        Ok(Value::Bool(true))
                    } else {
                        eval(ctx, right)
                    };
                }
                _ => {}
            }
            let l = eval(ctx, left)?;
            let r = eval(ctx, right)?;
            match op {
                BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => {
                    let (a, b) = (
                        l.as_int().expect("type-checked operand"),
                        r.as_int().expect("type-checked operand"),
                    );
                    let n = match op {
                        BinaryOp::Add => a.checked_add(b).ok_or(ExecFault::Overflow)?,
                        BinaryOp::Sub => a.checked_sub(b).ok_or(ExecFault::Overflow)?,
                        BinaryOp::Mul => a.checked_mul(b).ok_or(ExecFault::Overflow)?,
                        BinaryOp::Div => {
                            if b == 0 {
                                return Err(ExecFault::DivisionByZero);
                            }
                            a.checked_div(b).ok_or(ExecFault::Overflow)?
                        }
                        _ => unreachable!(),
                    };
                    Value::Int(n)
                }
                BinaryOp::Eq => Value::Bool(l == r),
                BinaryOp::Ne => Value::Bool(l != r),
                BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
                    let (a, b) = (
                        l.as_int().expect("type-checked operand"),
                        r.as_int().expect("type-checked operand"),
                    );
                    Value::Bool(match op {
                        BinaryOp::Lt => a < b,
                        BinaryOp::Le => a <= b,
                        BinaryOp::Gt => a > b,
                        BinaryOp::Ge => a >= b,
                        _ => unreachable!(),
                    })
                }
                BinaryOp::And | BinaryOp::Or => unreachable!("handled above"),
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InverseError {
    #[error("before-image field {field} outside instance of dimension {dim}")]
    SchemaMismatch { field: usize, dim: usize },
}

/// Restores every before-imaged field to its logged value. Touches the
/// store directly — never the scheduler — because strict two-phase locking
/// keeps the written fields held until the reject completes.
pub fn apply_inverse(record: &ExecutionRecord, store: &dyn FieldStore) -> Result<(), InverseError> {
    let dim = store.dimension();
    for (&field, value) in &record.before_image {
        if field >= dim {
            return Err(InverseError::SchemaMismatch { field, dim });
        }
        store.store(field, value.clone());
    }
    Ok(())
}

/// Validates argument values against an operation's parameter list.
pub fn check_args(op: &OperationDef, args: &[Value]) -> Result<(), String> {
    if op.params.len() != args.len() {
        return Err(format!(
            "operation `{}` takes {} argument(s), got {}",
            op.name,
            op.params.len(),
            args.len()
        ));
    }
    for (p, a) in op.params.iter().zip(args) {
        if p.ty != a.ty() {
            return Err(format!(
                "argument `{}` of `{}` expects {}, got {}",
                p.name,
                op.name,
                p.ty,
                a.ty()
            ));
        }
    }
    Ok(())
}

/// Snapshot type check of instance field values against a schema.
pub fn check_instance_values(values: &[Value], types: &[FieldType]) -> Result<(), String> {
    if values.len() != types.len() {
        return Err(format!(
            "expected {} field value(s), got {}",
            types.len(),
            values.len()
        ));
    }
    for (i, (v, t)) in values.iter().zip(types).enumerate() {
        if v.ty() != *t {
            return Err(format!("field {} expects {}, got {}", i, t, v.ty()));
        }
    }
    Ok(())
}
