//! Recursive-descent parser for ADT declarations.
//!
//! Identifiers are resolved and expressions type-checked while parsing, so
//! every diagnostic carries the line and column of the offending token.

use std::sync::Arc;

use super::analyze::infer_dav;
use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::{ParseError, ParseErrorKind};
use crate::value::{FieldType, Value};

const KEYWORDS: &[&str] = &[
    "adt", "op", "if", "then", "else", "return", "true", "false", "and", "or", "not", "integer",
    "boolean", "text",
];

pub(crate) struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub(crate) fn new(source: &str) -> Result<Self, ParseError> {
        Ok(Cursor {
            toks: lex(source)?,
            pos: 0,
        })
    }

    pub(crate) fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    /// Position of the current token, or of the end of input.
    pub(crate) fn here(&self) -> (u32, u32) {
        match self.toks.get(self.pos) {
            Some(t) => (t.line, t.col),
            None => self
                .toks
                .last()
                .map(|t| (t.line, t.col + 1))
                .unwrap_or((1, 1)),
        }
    }

    pub(crate) fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn error(&self, kind: ParseErrorKind) -> ParseError {
        let (line, col) = self.here();
        ParseError { line, col, kind }
    }

    pub(crate) fn syntax(&self, msg: impl Into<String>) -> ParseError {
        self.error(ParseErrorKind::Syntax(msg.into()))
    }

    pub(crate) fn expect(&mut self, want: &Tok) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t == want => {
                self.bump();
                Ok(())
            }
            Some(t) => Err(self.syntax(format!("expected {}, found {}", want.describe(), t.describe()))),
            None => Err(self.syntax(format!("expected {}, found end of input", want.describe()))),
        }
    }

    /// Consumes `word` if the current token is that identifier.
    pub(crate) fn eat_word(&mut self, word: &str) -> bool {
        if let Some(Tok::Ident(s)) = self.peek() {
            if s == word {
                self.bump();
                return true;
            }
        }
        false
    }

    pub(crate) fn expect_word(&mut self, word: &str) -> Result<(), ParseError> {
        if self.eat_word(word) {
            Ok(())
        } else {
            let found = match self.peek() {
                Some(t) => t.describe(),
                None => "end of input".to_string(),
            };
            Err(self.syntax(format!("expected `{word}`, found {found}")))
        }
    }

    pub(crate) fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                if KEYWORDS.contains(&s.as_str()) {
                    return Err(self.syntax(format!("`{s}` is a keyword, not a name")));
                }
                self.bump();
                Ok(s)
            }
            Some(t) => Err(self.syntax(format!("expected a name, found {}", t.describe()))),
            None => Err(self.syntax("expected a name, found end of input")),
        }
    }

    fn expect_type(&mut self) -> Result<FieldType, ParseError> {
        for (word, ty) in [
            ("integer", FieldType::Integer),
            ("boolean", FieldType::Boolean),
            ("text", FieldType::Text),
        ] {
            if self.eat_word(word) {
                return Ok(ty);
            }
        }
        let found = match self.peek() {
            Some(t) => t.describe(),
            None => "end of input".to_string(),
        };
        Err(self.syntax(format!("expected a type (integer, boolean, text), found {found}")))
    }
}

/// Parses a whole source: one or more ADT declarations.
pub fn parse_adts(source: &str) -> Result<Vec<AdtDecl>, ParseError> {
    let mut cur = Cursor::new(source)?;
    let mut decls = Vec::new();
    while !cur.at_end() {
        decls.push(parse_decl(&mut cur)?);
    }
    if decls.is_empty() {
        return Err(cur.syntax("expected an `adt` declaration"));
    }
    Ok(decls)
}

/// Parses a source containing exactly one ADT declaration.
pub fn parse_adt(source: &str) -> Result<AdtDecl, ParseError> {
    let mut decls = parse_adts(source)?;
    if decls.len() > 1 {
        let name = &decls[1].schema.name;
        return Err(ParseError {
            line: 1,
            col: 1,
            kind: ParseErrorKind::Syntax(format!(
                "expected a single ADT, found a second declaration `{name}`"
            )),
        });
    }
    Ok(decls.remove(0))
}

fn parse_decl(cur: &mut Cursor) -> Result<AdtDecl, ParseError> {
    cur.expect_word("adt")?;
    let name = cur.expect_ident()?;
    cur.expect(&Tok::LParen)?;
    let mut fields: Vec<FieldDef> = Vec::new();
    loop {
        let fname = cur.expect_ident()?;
        if fields.iter().any(|f| f.name == fname) {
            return Err(cur.error(ParseErrorKind::DuplicateName(fname)));
        }
        cur.expect(&Tok::Colon)?;
        let ty = cur.expect_type()?;
        fields.push(FieldDef { name: fname, ty });
        match cur.peek() {
            Some(Tok::Comma) => {
                cur.bump();
            }
            _ => break,
        }
    }
    cur.expect(&Tok::RParen)?;
    let schema = Arc::new(AdtSchema { name, fields });

    let mut ops: Vec<Arc<OperationDef>> = Vec::new();
    while let Some(Tok::Ident(word)) = cur.peek() {
        if word != "op" {
            break;
        }
        let (line, col) = cur.here();
        let op = parse_op(cur, &schema)?;
        if ops.iter().any(|o| o.name == op.name) {
            return Err(ParseError {
                line,
                col,
                kind: ParseErrorKind::DuplicateName(op.name.clone()),
            });
        }
        ops.push(Arc::new(op));
    }
    Ok(AdtDecl { schema, ops })
}

struct OpCtx<'a> {
    schema: &'a AdtSchema,
    params: Vec<Param>,
    locals: Vec<Local>,
}

impl OpCtx<'_> {
    fn lookup(&self, name: &str) -> Option<(Expr, FieldType)> {
        if let Some(i) = self.schema.field_index(name) {
            return Some((Expr::Field(i), self.schema.fields[i].ty));
        }
        if let Some(i) = self.params.iter().position(|p| p.name == name) {
            return Some((Expr::Param(i), self.params[i].ty));
        }
        if let Some(i) = self.locals.iter().position(|l| l.name == name) {
            return Some((Expr::Local(i), self.locals[i].ty));
        }
        None
    }
}

fn parse_op(cur: &mut Cursor, schema: &Arc<AdtSchema>) -> Result<OperationDef, ParseError> {
    cur.expect_word("op")?;
    let name = cur.expect_ident()?;
    cur.expect(&Tok::LParen)?;
    let mut params: Vec<Param> = Vec::new();
    if cur.peek() != Some(&Tok::RParen) {
        loop {
            let pname = cur.expect_ident()?;
            if schema.field_index(&pname).is_some() || params.iter().any(|p| p.name == pname) {
                return Err(cur.error(ParseErrorKind::DuplicateName(pname)));
            }
            cur.expect(&Tok::Colon)?;
            let ty = cur.expect_type()?;
            params.push(Param { name: pname, ty });
            match cur.peek() {
                Some(Tok::Comma) => {
                    cur.bump();
                }
                _ => break,
            }
        }
    }
    cur.expect(&Tok::RParen)?;
    let ret = if cur.peek() == Some(&Tok::Arrow) {
        cur.bump();
        Some(cur.expect_type()?)
    } else {
        None
    };

    let mut ctx = OpCtx {
        schema,
        params,
        locals: Vec::new(),
    };
    let body = parse_block(cur, &mut ctx, ret)?;
    let static_dav = infer_dav(&body, schema.dimension());
    Ok(OperationDef {
        name,
        params: ctx.params,
        ret,
        locals: ctx.locals,
        body,
        static_dav,
    })
}

fn parse_block(
    cur: &mut Cursor,
    ctx: &mut OpCtx<'_>,
    ret: Option<FieldType>,
) -> Result<Block, ParseError> {
    cur.expect(&Tok::LBrace)?;
    let mut stmts = Vec::new();
    loop {
        // Semicolons are separators; stray ones are harmless.
        while cur.peek() == Some(&Tok::Semi) {
            cur.bump();
        }
        if cur.peek() == Some(&Tok::RBrace) {
            cur.bump();
            return Ok(Block(stmts));
        }
        if cur.at_end() {
            return Err(cur.syntax("expected `}`, found end of input"));
        }
        stmts.push(parse_stmt(cur, ctx, ret)?);
    }
}

fn parse_stmt(
    cur: &mut Cursor,
    ctx: &mut OpCtx<'_>,
    ret: Option<FieldType>,
) -> Result<Stmt, ParseError> {
    if cur.eat_word("if") {
        let (cond, cond_ty) = parse_expr(cur, ctx)?;
        if cond_ty != FieldType::Boolean {
            return Err(cur.error(ParseErrorKind::TypeMismatch {
                expected: FieldType::Boolean.to_string(),
                found: cond_ty.to_string(),
            }));
        }
        cur.expect_word("then")?;
        let then_branch = parse_block(cur, ctx, ret)?;
        let else_branch = if cur.eat_word("else") {
            Some(parse_block(cur, ctx, ret)?)
        } else {
            None
        };
        return Ok(Stmt::If {
            cond,
            then_branch,
            else_branch,
        });
    }
    if cur.eat_word("return") {
        let (line, col) = cur.here();
        let (expr, ty) = parse_expr(cur, ctx)?;
        let Some(want) = ret else {
            return Err(ParseError {
                line,
                col,
                kind: ParseErrorKind::Syntax(
                    "`return` in an operation with no result type".to_string(),
                ),
            });
        };
        if ty != want {
            return Err(ParseError {
                line,
                col,
                kind: ParseErrorKind::TypeMismatch {
                    expected: want.to_string(),
                    found: ty.to_string(),
                },
            });
        }
        return Ok(Stmt::Return(expr));
    }

    // Assignment: `<field|local> := <expr>`.
    let (line, col) = cur.here();
    let name = cur.expect_ident()?;
    cur.expect(&Tok::Assign)?;
    let (expr, ty) = parse_expr(cur, ctx)?;
    if let Some(i) = ctx.schema.field_index(&name) {
        let want = ctx.schema.fields[i].ty;
        if ty != want {
            return Err(ParseError {
                line,
                col,
                kind: ParseErrorKind::TypeMismatch {
                    expected: want.to_string(),
                    found: ty.to_string(),
                },
            });
        }
        return Ok(Stmt::FieldAssign { field: i, expr });
    }
    if ctx.params.iter().any(|p| p.name == name) {
        return Err(ParseError {
            line,
            col,
            kind: ParseErrorKind::InvalidAssignment(name),
        });
    }
    if let Some(i) = ctx.locals.iter().position(|l| l.name == name) {
        let want = ctx.locals[i].ty;
        if ty != want {
            return Err(ParseError {
                line,
                col,
                kind: ParseErrorKind::TypeMismatch {
                    expected: want.to_string(),
                    found: ty.to_string(),
                },
            });
        }
        return Ok(Stmt::LocalAssign { local: i, expr });
    }
    // First assignment declares the local and fixes its type.
    ctx.locals.push(Local { name, ty });
    Ok(Stmt::LocalAssign {
        local: ctx.locals.len() - 1,
        expr,
    })
}

fn parse_expr(cur: &mut Cursor, ctx: &OpCtx<'_>) -> Result<(Expr, FieldType), ParseError> {
    parse_or(cur, ctx)
}

fn bool_binary(
    cur: &Cursor,
    op: BinaryOp,
    left: (Expr, FieldType),
    right: (Expr, FieldType),
) -> Result<(Expr, FieldType), ParseError> {
    for (_, ty) in [&left, &right] {
        if *ty != FieldType::Boolean {
            return Err(cur.error(ParseErrorKind::TypeMismatch {
                expected: FieldType::Boolean.to_string(),
                found: ty.to_string(),
            }));
        }
    }
    Ok((
        Expr::Binary {
            op,
            left: Box::new(left.0),
            right: Box::new(right.0),
        },
        FieldType::Boolean,
    ))
}

fn parse_or(cur: &mut Cursor, ctx: &OpCtx<'_>) -> Result<(Expr, FieldType), ParseError> {
    let mut lhs = parse_and(cur, ctx)?;
    while cur.eat_word("or") {
        let rhs = parse_and(cur, ctx)?;
        lhs = bool_binary(cur, BinaryOp::Or, lhs, rhs)?;
    }
    Ok(lhs)
}

fn parse_and(cur: &mut Cursor, ctx: &OpCtx<'_>) -> Result<(Expr, FieldType), ParseError> {
    let mut lhs = parse_not(cur, ctx)?;
    while cur.eat_word("and") {
        let rhs = parse_not(cur, ctx)?;
        lhs = bool_binary(cur, BinaryOp::And, lhs, rhs)?;
    }
    Ok(lhs)
}

fn parse_not(cur: &mut Cursor, ctx: &OpCtx<'_>) -> Result<(Expr, FieldType), ParseError> {
    if cur.eat_word("not") {
        let (operand, ty) = parse_not(cur, ctx)?;
        if ty != FieldType::Boolean {
            return Err(cur.error(ParseErrorKind::TypeMismatch {
                expected: FieldType::Boolean.to_string(),
                found: ty.to_string(),
            }));
        }
        return Ok((
            Expr::Unary {
                op: UnaryOp::Not,
                operand: Box::new(operand),
            },
            FieldType::Boolean,
        ));
    }
    parse_cmp(cur, ctx)
}

fn parse_cmp(cur: &mut Cursor, ctx: &OpCtx<'_>) -> Result<(Expr, FieldType), ParseError> {
    let (lhs, lty) = parse_add(cur, ctx)?;
    let op = match cur.peek() {
        Some(Tok::Eq) => BinaryOp::Eq,
        Some(Tok::Ne) => BinaryOp::Ne,
        Some(Tok::Lt) => BinaryOp::Lt,
        Some(Tok::Le) => BinaryOp::Le,
        Some(Tok::Gt) => BinaryOp::Gt,
        Some(Tok::Ge) => BinaryOp::Ge,
        _ => return Ok((lhs, lty)),
    };
    cur.bump();
    let (rhs, rty) = parse_add(cur, ctx)?;
    if lty != rty {
        return Err(cur.error(ParseErrorKind::TypeMismatch {
            expected: lty.to_string(),
            found: rty.to_string(),
        }));
    }
    let ordered = matches!(op, BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge);
    if ordered && lty != FieldType::Integer {
        return Err(cur.error(ParseErrorKind::TypeMismatch {
            expected: FieldType::Integer.to_string(),
            found: lty.to_string(),
        }));
    }
    Ok((
        Expr::Binary {
            op,
            left: Box::new(lhs),
            right: Box::new(rhs),
        },
        FieldType::Boolean,
    ))
}

fn int_binary(
    cur: &Cursor,
    op: BinaryOp,
    left: (Expr, FieldType),
    right: (Expr, FieldType),
) -> Result<(Expr, FieldType), ParseError> {
    for (_, ty) in [&left, &right] {
        if *ty != FieldType::Integer {
            return Err(cur.error(ParseErrorKind::TypeMismatch {
                expected: FieldType::Integer.to_string(),
                found: ty.to_string(),
            }));
        }
    }
    Ok((
        Expr::Binary {
            op,
            left: Box::new(left.0),
            right: Box::new(right.0),
        },
        FieldType::Integer,
    ))
}

fn parse_add(cur: &mut Cursor, ctx: &OpCtx<'_>) -> Result<(Expr, FieldType), ParseError> {
    let mut lhs = parse_mul(cur, ctx)?;
    loop {
        let op = match cur.peek() {
            Some(Tok::Plus) => BinaryOp::Add,
            Some(Tok::Minus) => BinaryOp::Sub,
            _ => return Ok(lhs),
        };
        cur.bump();
        let rhs = parse_mul(cur, ctx)?;
        lhs = int_binary(cur, op, lhs, rhs)?;
    }
}

fn parse_mul(cur: &mut Cursor, ctx: &OpCtx<'_>) -> Result<(Expr, FieldType), ParseError> {
    let mut lhs = parse_unary(cur, ctx)?;
    loop {
        let op = match cur.peek() {
            Some(Tok::Star) => BinaryOp::Mul,
            Some(Tok::Slash) => BinaryOp::Div,
            _ => return Ok(lhs),
        };
        cur.bump();
        let rhs = parse_unary(cur, ctx)?;
        lhs = int_binary(cur, op, lhs, rhs)?;
    }
}

fn parse_unary(cur: &mut Cursor, ctx: &OpCtx<'_>) -> Result<(Expr, FieldType), ParseError> {
    if cur.peek() == Some(&Tok::Minus) {
        cur.bump();
        let (operand, ty) = parse_unary(cur, ctx)?;
        if ty != FieldType::Integer {
            return Err(cur.error(ParseErrorKind::TypeMismatch {
                expected: FieldType::Integer.to_string(),
                found: ty.to_string(),
            }));
        }
        // Fold negated literals so `-3` is one literal.
        if let Expr::Literal(Value::Int(n)) = operand {
            return Ok((Expr::Literal(Value::Int(-n)), FieldType::Integer));
        }
        return Ok((
            Expr::Unary {
                op: UnaryOp::Neg,
                operand: Box::new(operand),
            },
            FieldType::Integer,
        ));
    }
    parse_primary(cur, ctx)
}

fn parse_primary(cur: &mut Cursor, ctx: &OpCtx<'_>) -> Result<(Expr, FieldType), ParseError> {
    match cur.peek().cloned() {
        Some(Tok::Int(n)) => {
            cur.bump();
            Ok((Expr::Literal(Value::Int(n)), FieldType::Integer))
        }
        Some(Tok::Str(s)) => {
            cur.bump();
            Ok((Expr::Literal(Value::Text(s)), FieldType::Text))
        }
        Some(Tok::LParen) => {
            cur.bump();
            let inner = parse_expr(cur, ctx)?;
            cur.expect(&Tok::RParen)?;
            Ok(inner)
        }
        Some(Tok::Ident(name)) => {
            if name == "true" || name == "false" {
                cur.bump();
                return Ok((
                    Expr::Literal(Value::Bool(name == "true")),
                    FieldType::Boolean,
                ));
            }
            if KEYWORDS.contains(&name.as_str()) {
                return Err(cur.syntax(format!("unexpected keyword `{name}` in expression")));
            }
            match ctx.lookup(&name) {
                Some((expr, ty)) => {
                    cur.bump();
                    Ok((expr, ty))
                }
                None => Err(cur.error(ParseErrorKind::UnknownIdentifier(name))),
            }
        }
        Some(t) => Err(cur.syntax(format!("expected an expression, found {}", t.describe()))),
        None => Err(cur.syntax("expected an expression, found end of input")),
    }
}
