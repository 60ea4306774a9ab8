//! Static-analysis report: per-operation access vectors and the pairwise
//! commutativity matrix, as printed by `fieldlock analyze`.

use std::fmt::Write as _;

use crate::dsl::{commutativity_matrix, AdtDecl};

pub fn analyze_report(decl: &AdtDecl) -> String {
    let mut out = String::new();
    write!(out, "adt {}: {} field(s) (", decl.schema.name, decl.schema.dimension()).unwrap();
    for (i, f) in decl.schema.fields.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write!(out, "{}: {}", f.name, f.ty).unwrap();
    }
    out.push_str(")\n");
    for op in &decl.ops {
        writeln!(out, "op {} {}", op.name, op.static_dav).unwrap();
    }
    if decl.ops.is_empty() {
        return out;
    }
    let m = commutativity_matrix(decl);
    let width = m
        .op_names
        .iter()
        .map(|n| n.len())
        .max()
        .unwrap_or(0)
        .max(3)
        + 2;
    out.push_str("commutes:\n");
    write!(out, "{:width$}", "").unwrap();
    for name in &m.op_names {
        write!(out, "{name:width$}").unwrap();
    }
    out.push('\n');
    for (i, name) in m.op_names.iter().enumerate() {
        write!(out, "{name:width$}").unwrap();
        for j in 0..m.op_names.len() {
            let cell = if m.entries[i][j] { "yes" } else { "no" };
            write!(out, "{cell:width$}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_adt;

    #[test]
    fn report_shows_vectors_and_matrix() {
        let decl = parse_adt(
            "\
adt Account(balance: integer, owner: text)
op deposit(a: integer) { balance := balance + a }
op getOwner() -> text { return owner }
",
        )
        .unwrap();
        let report = analyze_report(&decl);
        assert!(report.contains("op deposit (W,N)"));
        assert!(report.contains("op getOwner (N,R)"));
        assert!(report.contains("commutes:"));
        // deposit/deposit conflicts, deposit/getOwner commutes.
        let lines: Vec<&str> = report.lines().collect();
        let dep_row = lines.iter().find(|l| l.starts_with("deposit")).unwrap();
        assert!(dep_row.contains("no") && dep_row.contains("yes"));
    }

    #[test]
    fn op_free_adt_has_no_matrix() {
        let decl = parse_adt("adt A(x: integer)").unwrap();
        let report = analyze_report(&decl);
        assert!(!report.contains("commutes:"));
    }
}
