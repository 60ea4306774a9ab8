//! Static access-vector inference and the pairwise commutativity matrix.

use crate::access::{AccessMode, AccessVector};

use super::ast::{AdtDecl, Block, Expr, Stmt};

/// Infers the static access vector of an operation body: `Write` on a field
/// assigned anywhere in the body (branches included, reachable or not),
/// otherwise `Read` on a field appearing in any expression, otherwise
/// `Null`. Purely syntactic by construction.
pub fn infer_dav(body: &Block, dimension: usize) -> AccessVector {
    let mut written = vec![false; dimension];
    let mut read = vec![false; dimension];
    scan_block(body, &mut written, &mut read);
    AccessVector::new(
        (0..dimension)
            .map(|i| {
                if written[i] {
                    AccessMode::Write
                } else if read[i] {
                    AccessMode::Read
                } else {
                    AccessMode::Null
                }
            })
            .collect(),
    )
}

fn scan_block(block: &Block, written: &mut [bool], read: &mut [bool]) {
    for stmt in &block.0 {
        match stmt {
            Stmt::FieldAssign { field, expr } => {
                written[*field] = true;
                scan_expr(expr, read);
            }
            Stmt::LocalAssign { expr, .. } => scan_expr(expr, read),
            Stmt::Return(expr) => scan_expr(expr, read),
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                scan_expr(cond, read);
                scan_block(then_branch, written, read);
                if let Some(els) = else_branch {
                    scan_block(els, written, read);
                }
            }
        }
    }
}

fn scan_expr(expr: &Expr, read: &mut [bool]) {
    match expr {
        Expr::Field(i) => read[*i] = true,
        Expr::Literal(_) | Expr::Param(_) | Expr::Local(_) => {}
        Expr::Unary { operand, .. } => scan_expr(operand, read),
        Expr::Binary { left, right, .. } => {
            scan_expr(left, read);
            scan_expr(right, read);
        }
    }
}

/// Pairwise strong-commutativity table over an ADT's operations, in
/// declaration order. Symmetric; the diagonal compares an operation's
/// vector with itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommutativityMatrix {
    pub op_names: Vec<String>,
    pub entries: Vec<Vec<bool>>,
}

impl CommutativityMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<bool> {
        let i = self.op_names.iter().position(|n| n == a)?;
        let j = self.op_names.iter().position(|n| n == b)?;
        Some(self.entries[i][j])
    }
}

pub fn commutativity_matrix(decl: &AdtDecl) -> CommutativityMatrix {
    let op_names: Vec<String> = decl.ops.iter().map(|o| o.name.clone()).collect();
    let entries = decl
        .ops
        .iter()
        .map(|a| {
            decl.ops
                .iter()
                .map(|b| {
                    a.static_dav
                        .commutes_with(&b.static_dav)
                        .expect("ops of one schema share a dimension")
                })
                .collect()
        })
        .collect();
    CommutativityMatrix { op_names, entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_adt;

    #[test]
    fn infer_examples() {
        let decl = parse_adt(
            "\
adt Account(balance: integer, owner: text)
op deposit(a: integer) { balance := balance + a }
op getOwner() -> text { return owner }
op noop() { }
",
        )
        .unwrap();
        assert_eq!(decl.op("deposit").unwrap().static_dav.to_string(), "(W,N)");
        assert_eq!(decl.op("getOwner").unwrap().static_dav.to_string(), "(N,R)");
        assert_eq!(decl.op("noop").unwrap().static_dav.to_string(), "(N,N)");
    }

    #[test]
    fn assignment_in_untaken_branch_is_still_write() {
        let decl = parse_adt(
            "\
adt Bounded(balance: integer, limit: integer)
op cap() { if balance > limit then { balance := limit } }
",
        )
        .unwrap();
        assert_eq!(decl.op("cap").unwrap().static_dav.to_string(), "(W,R)");
    }

    #[test]
    fn self_referential_assignment_is_write_not_read() {
        let decl = parse_adt("adt C(n: integer) op inc() { n := n + 1 }").unwrap();
        assert_eq!(decl.op("inc").unwrap().static_dav.to_string(), "(W)");
    }

    #[test]
    fn matrix_examples() {
        let decl = parse_adt(
            "\
adt Account(balance: integer, owner: text)
op deposit(a: integer) { balance := balance + a }
op getOwner() -> text { return owner }
op noop() { }
",
        )
        .unwrap();
        let m = commutativity_matrix(&decl);
        assert_eq!(m.get("deposit", "getOwner"), Some(true));
        assert_eq!(m.get("getOwner", "deposit"), Some(true));
        assert_eq!(m.get("deposit", "deposit"), Some(false));
        assert_eq!(m.get("noop", "deposit"), Some(true));
        assert_eq!(m.get("noop", "noop"), Some(true));
    }

    #[test]
    fn single_op_matrix() {
        let decl = parse_adt("adt A(x: integer) op get() -> integer { return x }").unwrap();
        let m = commutativity_matrix(&decl);
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.get("get", "get"), Some(true));
    }
}
