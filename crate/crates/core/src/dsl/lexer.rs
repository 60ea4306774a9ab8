//! Tokeniser shared by the ADT grammar and the workload file grammar.
//!
//! Words are lexed as plain identifiers; keywords are contextual and
//! matched by the parsers.

use super::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Assign, // :=
    Arrow,  // ->
    Eq,     // =
    Ne,     // !=
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Dot,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Str(_) => "text literal".to_string(),
            Tok::LParen => "`(`".to_string(),
            Tok::RParen => "`)`".to_string(),
            Tok::LBrace => "`{`".to_string(),
            Tok::RBrace => "`}`".to_string(),
            Tok::Comma => "`,`".to_string(),
            Tok::Semi => "`;`".to_string(),
            Tok::Colon => "`:`".to_string(),
            Tok::Assign => "`:=`".to_string(),
            Tok::Arrow => "`->`".to_string(),
            Tok::Eq => "`=`".to_string(),
            Tok::Ne => "`!=`".to_string(),
            Tok::Lt => "`<`".to_string(),
            Tok::Le => "`<=`".to_string(),
            Tok::Gt => "`>`".to_string(),
            Tok::Ge => "`>=`".to_string(),
            Tok::Plus => "`+`".to_string(),
            Tok::Minus => "`-`".to_string(),
            Tok::Star => "`*`".to_string(),
            Tok::Slash => "`/`".to_string(),
            Tok::Dot => "`.`".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn error(&self, line: u32, col: u32, msg: String) -> ParseError {
        ParseError {
            line,
            col,
            kind: ParseErrorKind::Syntax(msg),
        }
    }
}

pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer {
        chars: src.chars().peekable(),
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        // Skip whitespace and `//` comments.
        loop {
            match lx.peek() {
                Some(c) if c.is_whitespace() => {
                    lx.bump();
                }
                Some('/') => {
                    let mut ahead = lx.chars.clone();
                    ahead.next();
                    if ahead.peek() == Some(&'/') {
                        while let Some(c) = lx.peek() {
                            if c == '\n' {
                                break;
                            }
                            lx.bump();
                        }
                    } else {
                        break;
                    }
                }
                _ => break,
            }
        }
        let (line, col) = (lx.line, lx.col);
        let Some(c) = lx.peek() else { break };
        let tok = match c {
            '(' => {
                lx.bump();
                Tok::LParen
            }
            ')' => {
                lx.bump();
                Tok::RParen
            }
            '{' => {
                lx.bump();
                Tok::LBrace
            }
            '}' => {
                lx.bump();
                Tok::RBrace
            }
            ',' => {
                lx.bump();
                Tok::Comma
            }
            ';' => {
                lx.bump();
                Tok::Semi
            }
            '.' => {
                lx.bump();
                Tok::Dot
            }
            '+' => {
                lx.bump();
                Tok::Plus
            }
            '*' => {
                lx.bump();
                Tok::Star
            }
            '/' => {
                lx.bump();
                Tok::Slash
            }
            '=' => {
                lx.bump();
                // Accept `==` as a synonym for `=`.
                if lx.peek() == Some('=') {
                    lx.bump();
                }
                Tok::Eq
            }
            '-' => {
                lx.bump();
                if lx.peek() == Some('>') {
                    lx.bump();
                    Tok::Arrow
                } else {
                    Tok::Minus
                }
            }
            ':' => {
                lx.bump();
                if lx.peek() == Some('=') {
                    lx.bump();
                    Tok::Assign
                } else {
                    Tok::Colon
                }
            }
            '!' => {
                lx.bump();
                if lx.peek() == Some('=') {
                    lx.bump();
                    Tok::Ne
                } else {
                    return Err(lx.error(line, col, "expected `!=`".to_string()));
                }
            }
            '<' => {
                lx.bump();
                if lx.peek() == Some('=') {
                    lx.bump();
                    Tok::Le
                } else {
                    Tok::Lt
                }
            }
            '>' => {
                lx.bump();
                if lx.peek() == Some('=') {
                    lx.bump();
                    Tok::Ge
                } else {
                    Tok::Gt
                }
            }
            '"' => {
                lx.bump();
                let mut s = String::new();
                loop {
                    match lx.bump() {
                        None | Some('\n') => {
                            return Err(lx.error(line, col, "unterminated text literal".into()))
                        }
                        Some('"') => break,
                        Some('\\') => match lx.bump() {
                            Some('\\') => s.push('\\'),
                            Some('"') => s.push('"'),
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            other => {
                                return Err(lx.error(
                                    line,
                                    col,
                                    format!("bad escape `\\{}`", other.unwrap_or(' ')),
                                ))
                            }
                        },
                        Some(c) => s.push(c),
                    }
                }
                Tok::Str(s)
            }
            c if c.is_ascii_digit() => {
                let mut text = String::new();
                while let Some(d) = lx.peek() {
                    if d.is_ascii_digit() {
                        text.push(d);
                        lx.bump();
                    } else {
                        break;
                    }
                }
                let n: i64 = text
                    .parse()
                    .map_err(|_| lx.error(line, col, format!("integer `{text}` out of range")))?;
                Tok::Int(n)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut name = String::new();
                while let Some(d) = lx.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        name.push(d);
                        lx.bump();
                    } else {
                        break;
                    }
                }
                Tok::Ident(name)
            }
            other => {
                return Err(lx.error(line, col, format!("unexpected character `{other}`")));
            }
        };
        out.push(Token { tok, line, col });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_statement() {
        let toks = lex("balance := balance + 1; // bump\n").unwrap();
        let kinds: Vec<&Tok> = toks.iter().map(|t| &t.tok).collect();
        assert_eq!(
            kinds,
            vec![
                &Tok::Ident("balance".into()),
                &Tok::Assign,
                &Tok::Ident("balance".into()),
                &Tok::Plus,
                &Tok::Int(1),
                &Tok::Semi,
            ]
        );
    }

    #[test]
    fn tracks_positions() {
        let toks = lex("a\n  b").unwrap();
        assert_eq!((toks[0].line, toks[0].col), (1, 1));
        assert_eq!((toks[1].line, toks[1].col), (2, 3));
    }

    #[test]
    fn rejects_garbage() {
        assert!(lex("a # b").is_err());
        assert!(lex("\"open").is_err());
        assert!(lex("99999999999999999999").is_err());
    }

    #[test]
    fn double_equals_is_equality() {
        let toks = lex("a == b").unwrap();
        assert_eq!(toks[1].tok, Tok::Eq);
    }
}
