//! A small operation-definition language over tuple-based ADTs.
//!
//! Source files (`.adt`) declare a schema and its operations:
//!
//! ```text
//! adt Account(balance: integer, owner: text)
//!
//! op deposit(a: integer) {
//!   balance := balance + a;
//! }
//!
//! op getOwner() -> text {
//!   return owner;
//! }
//! ```
//!
//! Statements are assignments (`name := expr`), conditionals
//! (`if expr then { ... } [else { ... }]`), and `return expr`; `//` starts
//! a comment. There are no loops: access vectors are occurrence-based, so
//! loops would add nothing, and every execution terminates. Each parsed
//! operation carries its statically inferred access vector.

mod analyze;
mod ast;
mod lexer;
mod parser;

pub use analyze::{commutativity_matrix, infer_dav, CommutativityMatrix};
pub use ast::{
    AdtDecl, AdtSchema, Block, Expr, FieldDef, Local, OperationDef, Param, Stmt, UnaryOp,
};
pub use ast::BinaryOp;
pub use parser::{parse_adt, parse_adts};

pub(crate) use lexer::Tok;
pub(crate) use parser::Cursor;

use thiserror::Error;

/// A diagnostic with the 1-based line and column of the offending token.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {kind}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("type mismatch: expected {expected}, found {found}")]
    TypeMismatch { expected: String, found: String },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("cannot assign to parameter `{0}`")]
    InvalidAssignment(String),
}
