//! Workload files: a set of ADTs, named instances with initial values, and
//! transaction scripts.
//!
//! ```text
//! use account.adt
//! instance acct1: Account(balance=100, owner="ann")
//! txn t1 { acct1.deposit(5); acct1.getOwner(); }
//! ```
//!
//! `use` lines resolve through a caller-supplied loader, so tests can feed
//! sources from memory and the CLI resolves paths relative to the workload
//! file.

use std::collections::HashMap;

use thiserror::Error;

use crate::dsl::{parse_adts, AdtDecl, Cursor, ParseError, ParseErrorKind, Tok};
use crate::interp;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceDecl {
    pub name: String,
    pub adt: String,
    pub init: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpCall {
    pub instance: String,
    pub op: String,
    pub args: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxnScript {
    pub name: String,
    pub steps: Vec<OpCall>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Workload {
    pub adts: Vec<AdtDecl>,
    pub instances: Vec<InstanceDecl>,
    pub txns: Vec<TxnScript>,
}

impl Workload {
    pub fn adt(&self, name: &str) -> Option<&AdtDecl> {
        self.adts.iter().find(|d| d.schema.name == name)
    }

    pub fn instance(&self, name: &str) -> Option<&InstanceDecl> {
        self.instances.iter().find(|i| i.name == name)
    }

    /// The declaration backing an instance.
    pub fn decl_of(&self, instance: &str) -> Option<&AdtDecl> {
        self.adt(&self.instance(instance)?.adt)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("cannot load `{path}`: {reason}")]
    Load { path: String, reason: String },
}

/// Parses a workload. `load` maps a `use` path to ADT source text.
pub fn parse_workload(
    source: &str,
    load: &mut dyn FnMut(&str) -> Result<String, String>,
) -> Result<Workload, WorkloadError> {
    let mut w = Workload::default();
    // `use` lines carry free-form paths, so they are handled line-wise and
    // blanked out of the text handed to the tokeniser (keeping positions).
    let mut body = String::new();
    for (lineno, line) in source.lines().enumerate() {
        let code = line.split("//").next().unwrap_or("");
        let trimmed = code.trim();
        if let Some(rest) = trimmed.strip_prefix("use ") {
            let path = rest.trim().trim_matches('"');
            if path.is_empty() {
                return Err(ParseError {
                    line: lineno as u32 + 1,
                    col: 1,
                    kind: ParseErrorKind::Syntax("`use` needs a file path".to_string()),
                }
                .into());
            }
            let text = load(path).map_err(|reason| WorkloadError::Load {
                path: path.to_string(),
                reason,
            })?;
            for decl in parse_adts(&text)? {
                if w.adt(&decl.schema.name).is_some() {
                    return Err(ParseError {
                        line: lineno as u32 + 1,
                        col: 1,
                        kind: ParseErrorKind::DuplicateName(decl.schema.name.clone()),
                    }
                    .into());
                }
                w.adts.push(decl);
            }
            body.push('\n');
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }

    let mut cur = Cursor::new(&body)?;
    while !cur.at_end() {
        if cur.eat_word("instance") {
            parse_instance(&mut cur, &mut w)?;
        } else if cur.eat_word("txn") {
            parse_txn(&mut cur, &mut w)?;
        } else {
            return Err(cur
                .syntax("expected `instance` or `txn`".to_string())
                .into());
        }
    }
    Ok(w)
}

fn parse_literal(cur: &mut Cursor) -> Result<Value, ParseError> {
    match cur.peek().cloned() {
        Some(Tok::Int(n)) => {
            cur.bump();
            Ok(Value::Int(n))
        }
        Some(Tok::Minus) => {
            cur.bump();
            match cur.peek().cloned() {
                Some(Tok::Int(n)) => {
                    cur.bump();
                    Ok(Value::Int(-n))
                }
                _ => Err(cur.syntax("expected an integer after `-`")),
            }
        }
        Some(Tok::Str(s)) => {
            cur.bump();
            Ok(Value::Text(s))
        }
        Some(Tok::Ident(w)) if w == "true" || w == "false" => {
            cur.bump();
            Ok(Value::Bool(w == "true"))
        }
        _ => Err(cur.syntax("expected a literal value")),
    }
}

fn parse_instance(cur: &mut Cursor, w: &mut Workload) -> Result<(), WorkloadError> {
    let name = cur.expect_ident()?;
    if w.instance(&name).is_some() {
        return Err(ParseError {
            line: cur.here().0,
            col: cur.here().1,
            kind: ParseErrorKind::DuplicateName(name),
        }
        .into());
    }
    cur.expect(&Tok::Colon)?;
    let adt_pos = cur.here();
    let adt = cur.expect_ident()?;
    let Some(decl) = w.adt(&adt) else {
        return Err(ParseError {
            line: adt_pos.0,
            col: adt_pos.1,
            kind: ParseErrorKind::UnknownIdentifier(adt),
        }
        .into());
    };
    let schema = decl.schema.clone();
    cur.expect(&Tok::LParen)?;
    let mut init: Vec<Option<Value>> = vec![None; schema.dimension()];
    if cur.peek() != Some(&Tok::RParen) {
        loop {
            let fpos = cur.here();
            let fname = cur.expect_ident()?;
            let Some(idx) = schema.field_index(&fname) else {
                return Err(ParseError {
                    line: fpos.0,
                    col: fpos.1,
                    kind: ParseErrorKind::UnknownIdentifier(fname),
                }
                .into());
            };
            if init[idx].is_some() {
                return Err(ParseError {
                    line: fpos.0,
                    col: fpos.1,
                    kind: ParseErrorKind::DuplicateName(fname),
                }
                .into());
            }
            cur.expect(&Tok::Eq)?;
            let vpos = cur.here();
            let value = parse_literal(cur)?;
            if value.ty() != schema.fields[idx].ty {
                return Err(ParseError {
                    line: vpos.0,
                    col: vpos.1,
                    kind: ParseErrorKind::TypeMismatch {
                        expected: schema.fields[idx].ty.to_string(),
                        found: value.ty().to_string(),
                    },
                }
                .into());
            }
            init[idx] = Some(value);
            if cur.peek() == Some(&Tok::Comma) {
                cur.bump();
            } else {
                break;
            }
        }
    }
    cur.expect(&Tok::RParen)?;
    let mut values = Vec::with_capacity(init.len());
    for (i, v) in init.into_iter().enumerate() {
        match v {
            Some(v) => values.push(v),
            None => {
                return Err(ParseError {
                    line: cur.here().0,
                    col: cur.here().1,
                    kind: ParseErrorKind::Syntax(format!(
                        "missing initial value for field `{}`",
                        schema.field_name(i)
                    )),
                }
                .into())
            }
        }
    }
    w.instances.push(InstanceDecl {
        name,
        adt,
        init: values,
    });
    Ok(())
}

fn parse_txn(cur: &mut Cursor, w: &mut Workload) -> Result<(), WorkloadError> {
    let name = cur.expect_ident()?;
    if w.txns.iter().any(|t| t.name == name) {
        return Err(ParseError {
            line: cur.here().0,
            col: cur.here().1,
            kind: ParseErrorKind::DuplicateName(name),
        }
        .into());
    }
    cur.expect(&Tok::LBrace)?;
    let mut steps = Vec::new();
    loop {
        while cur.peek() == Some(&Tok::Semi) {
            cur.bump();
        }
        if cur.peek() == Some(&Tok::RBrace) {
            cur.bump();
            break;
        }
        let ipos = cur.here();
        let instance = cur.expect_ident()?;
        let Some(inst) = w.instance(&instance) else {
            return Err(ParseError {
                line: ipos.0,
                col: ipos.1,
                kind: ParseErrorKind::UnknownIdentifier(instance),
            }
            .into());
        };
        let decl = w.adt(&inst.adt).expect("instance ADT was checked").clone();
        cur.expect(&Tok::Dot)?;
        let opos = cur.here();
        let op = cur.expect_ident()?;
        let Some(opdef) = decl.op(&op) else {
            return Err(ParseError {
                line: opos.0,
                col: opos.1,
                kind: ParseErrorKind::UnknownIdentifier(op),
            }
            .into());
        };
        cur.expect(&Tok::LParen)?;
        let mut args = Vec::new();
        if cur.peek() != Some(&Tok::RParen) {
            loop {
                args.push(parse_literal(cur)?);
                if cur.peek() == Some(&Tok::Comma) {
                    cur.bump();
                } else {
                    break;
                }
            }
        }
        cur.expect(&Tok::RParen)?;
        if let Err(msg) = interp::check_args(opdef, &args) {
            return Err(ParseError {
                line: opos.0,
                col: opos.1,
                kind: ParseErrorKind::Syntax(msg),
            }
            .into());
        }
        steps.push(OpCall { instance, op, args });
    }
    w.txns.push(TxnScript { name, steps });
    Ok(())
}

/// Loader over an in-memory file map, for tests and generated workloads.
pub fn memory_loader(files: HashMap<String, String>) -> impl FnMut(&str) -> Result<String, String> {
    move |path: &str| {
        files
            .get(path)
            .cloned()
            .ok_or_else(|| "not found".to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ADT: &str = "\
adt Account(balance: integer, owner: text)
op deposit(a: integer) { balance := balance + a }
op getOwner() -> text { return owner }
";

    fn loader() -> impl FnMut(&str) -> Result<String, String> {
        let mut files = HashMap::new();
        files.insert("account.adt".to_string(), ADT.to_string());
        memory_loader(files)
    }

    #[test]
    fn parses_full_workload() {
        let src = "\
use account.adt
instance a1: Account(balance=100, owner=\"ann\")
instance a2: Account(owner=\"bob\", balance=-5)
txn t1 { a1.deposit(5); a2.getOwner(); }
txn t2 { }
";
        let w = parse_workload(src, &mut loader()).unwrap();
        assert_eq!(w.adts.len(), 1);
        assert_eq!(w.instances.len(), 2);
        assert_eq!(w.instances[1].init, vec![Value::Int(-5), Value::Text("bob".into())]);
        assert_eq!(w.txns.len(), 2);
        assert_eq!(w.txns[0].steps.len(), 2);
        assert_eq!(w.txns[0].steps[0].args, vec![Value::Int(5)]);
    }

    #[test]
    fn missing_use_file_is_reported() {
        let err = parse_workload("use nope.adt\n", &mut loader()).unwrap_err();
        assert!(matches!(err, WorkloadError::Load { ref path, .. } if path == "nope.adt"));
    }

    #[test]
    fn unknown_instance_op_and_field_are_rejected() {
        let src = "use account.adt\ninstance a: Account(balance=1, owner=\"x\")\ntxn t { b.deposit(1); }";
        assert!(parse_workload(src, &mut loader()).is_err());
        let src = "use account.adt\ninstance a: Account(balance=1, owner=\"x\")\ntxn t { a.close(); }";
        assert!(parse_workload(src, &mut loader()).is_err());
        let src = "use account.adt\ninstance a: Account(credit=1, owner=\"x\")";
        assert!(parse_workload(src, &mut loader()).is_err());
    }

    #[test]
    fn init_must_cover_all_fields_with_matching_types() {
        let src = "use account.adt\ninstance a: Account(balance=1)";
        assert!(parse_workload(src, &mut loader()).is_err());
        let src = "use account.adt\ninstance a: Account(balance=true, owner=\"x\")";
        assert!(parse_workload(src, &mut loader()).is_err());
    }

    #[test]
    fn arg_arity_and_types_are_checked() {
        let src = "use account.adt\ninstance a: Account(balance=1, owner=\"x\")\ntxn t { a.deposit(); }";
        assert!(parse_workload(src, &mut loader()).is_err());
        let src =
            "use account.adt\ninstance a: Account(balance=1, owner=\"x\")\ntxn t { a.deposit(true); }";
        assert!(parse_workload(src, &mut loader()).is_err());
    }
}
