//! Resolved syntax trees for ADT declarations and operation bodies.
//!
//! Identifiers are resolved to indices at parse time: fields index into the
//! schema, parameters and locals into per-operation tables. The original
//! names are kept so trees pretty-print back to canonical source.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::access::AccessVector;
use crate::value::{FieldType, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDef {
    pub name: String,
    pub ty: FieldType,
}

/// A tuple-based ADT: a named cartesian product of typed root fields.
/// Field order is fixed and indexes access vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdtSchema {
    pub name: String,
    pub fields: Vec<FieldDef>,
}

impl AdtSchema {
    pub fn dimension(&self) -> usize {
        self.fields.len()
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    pub fn field_name(&self, i: usize) -> &str {
        &self.fields[i].name
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: FieldType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Local {
    pub name: String,
    pub ty: FieldType,
}

/// An operation definition with its statically inferred access vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperationDef {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Option<FieldType>,
    pub locals: Vec<Local>,
    pub body: Block,
    pub static_dav: AccessVector,
}

/// A parsed ADT declaration: the schema plus its operations, in
/// declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdtDecl {
    pub schema: Arc<AdtSchema>,
    pub ops: Vec<Arc<OperationDef>>,
}

impl AdtDecl {
    pub fn op(&self, name: &str) -> Option<&Arc<OperationDef>> {
        self.ops.iter().find(|o| o.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Block(pub Vec<Stmt>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    FieldAssign { field: usize, expr: Expr },
    LocalAssign { local: usize, expr: Expr },
    If { cond: Expr, then_branch: Block, else_branch: Option<Block> },
    Return(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Literal(Value),
    Field(usize),
    Param(usize),
    Local(usize),
    Unary { op: UnaryOp, operand: Box<Expr> },
    Binary { op: BinaryOp, left: Box<Expr>, right: Box<Expr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
        }
    }

    /// Binding strength for the pretty printer; higher binds tighter.
    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq
            | BinaryOp::Ne
            | BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge => 3,
            BinaryOp::Add | BinaryOp::Sub => 4,
            BinaryOp::Mul | BinaryOp::Div => 5,
        }
    }
}

impl AdtDecl {
    /// Canonical source form; reparsing it yields a structurally identical
    /// declaration.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        write!(out, "adt {}(", self.schema.name).unwrap();
        for (i, f) in self.schema.fields.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write!(out, "{}: {}", f.name, f.ty).unwrap();
        }
        out.push_str(")\n");
        for op in &self.ops {
            out.push('\n');
            self.write_op(&mut out, op);
        }
        out
    }

    fn write_op(&self, out: &mut String, op: &OperationDef) {
        write!(out, "op {}(", op.name).unwrap();
        for (i, p) in op.params.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write!(out, "{}: {}", p.name, p.ty).unwrap();
        }
        out.push(')');
        if let Some(rt) = op.ret {
            write!(out, " -> {rt}").unwrap();
        }
        out.push_str(" {\n");
        self.write_block(out, op, &op.body, 1);
        out.push_str("}\n");
    }

    fn write_block(&self, out: &mut String, op: &OperationDef, block: &Block, indent: usize) {
        for stmt in &block.0 {
            for _ in 0..indent {
                out.push_str("  ");
            }
            match stmt {
                Stmt::FieldAssign { field, expr } => {
                    write!(out, "{} := ", self.schema.field_name(*field)).unwrap();
                    self.write_expr(out, op, expr, 0);
                    out.push_str(";\n");
                }
                Stmt::LocalAssign { local, expr } => {
                    write!(out, "{} := ", op.locals[*local].name).unwrap();
                    self.write_expr(out, op, expr, 0);
                    out.push_str(";\n");
                }
                Stmt::Return(expr) => {
                    out.push_str("return ");
                    self.write_expr(out, op, expr, 0);
                    out.push_str(";\n");
                }
                Stmt::If { cond, then_branch, else_branch } => {
                    out.push_str("if ");
                    self.write_expr(out, op, cond, 0);
                    out.push_str(" then {\n");
                    self.write_block(out, op, then_branch, indent + 1);
                    for _ in 0..indent {
                        out.push_str("  ");
                    }
                    out.push('}');
                    if let Some(els) = else_branch {
                        out.push_str(" else {\n");
                        self.write_block(out, op, els, indent + 1);
                        for _ in 0..indent {
                            out.push_str("  ");
                        }
                        out.push('}');
                    }
                    out.push('\n');
                }
            }
        }
    }

    fn write_expr(&self, out: &mut String, op: &OperationDef, expr: &Expr, min_prec: u8) {
        match expr {
            Expr::Literal(v) => write!(out, "{v}").unwrap(),
            Expr::Field(i) => out.push_str(self.schema.field_name(*i)),
            Expr::Param(i) => out.push_str(&op.params[*i].name),
            Expr::Local(i) => out.push_str(&op.locals[*i].name),
            Expr::Unary { op: uop, operand } => {
                match uop {
                    UnaryOp::Neg => out.push('-'),
                    UnaryOp::Not => out.push_str("not "),
                }
                // Unary binds tighter than any binary operator.
                self.write_expr(out, op, operand, 6);
            }
            Expr::Binary { op: bop, left, right } => {
                let prec = bop.precedence();
                let need_parens = prec < min_prec;
                if need_parens {
                    out.push('(');
                }
                // Comparisons are non-associative, so a comparison operand
                // must be parenthesised; other operators are left-associative.
                let left_prec = if prec == 3 { prec + 1 } else { prec };
                self.write_expr(out, op, left, left_prec);
                write!(out, " {} ", bop.symbol()).unwrap();
                self.write_expr(out, op, right, prec + 1);
                if need_parens {
                    out.push(')');
                }
            }
        }
    }
}
