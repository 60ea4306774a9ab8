//! Runtime values for the three field types.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Declared type of a field, parameter, or operation result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldType {
    Integer,
    Boolean,
    Text,
}

impl FieldType {
    pub fn keyword(self) -> &'static str {
        match self {
            FieldType::Integer => "integer",
            FieldType::Boolean => "boolean",
            FieldType::Text => "text",
        }
    }
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// A runtime value. Ordered and hashable so outcomes can live in sets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Value {
    pub fn ty(&self) -> FieldType {
        match self {
            Value::Int(_) => FieldType::Integer,
            Value::Bool(_) => FieldType::Boolean,
            Value::Text(_) => FieldType::Text,
        }
    }

    /// Zero value of a type; uninitialised locals read as this.
    pub fn default_of(ty: FieldType) -> Value {
        match ty {
            FieldType::Integer => Value::Int(0),
            FieldType::Boolean => Value::Bool(false),
            FieldType::Text => Value::Text(String::new()),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

/// Displays in source form: integers bare, booleans as keywords, text
/// double-quoted with `\\`, `\"`, `\n` and `\t` escapes. This is the exact
/// form used in undo-log lines and workload files.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Text(s) => {
                write!(f, "\"")?;
                for c in s.chars() {
                    match c {
                        '\\' => write!(f, "\\\\")?,
                        '"' => write!(f, "\\\"")?,
                        '\n' => write!(f, "\\n")?,
                        '\t' => write!(f, "\\t")?,
                        _ => write!(f, "{c}")?,
                    }
                }
                write!(f, "\"")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed value literal: {0}")]
pub struct ValueParseError(pub String);

impl Value {
    /// Parses the source form produced by [`fmt::Display`].
    pub fn parse_literal(s: &str) -> Result<Value, ValueParseError> {
        let s = s.trim();
        match s {
            "true" => return Ok(Value::Bool(true)),
            "false" => return Ok(Value::Bool(false)),
            _ => {}
        }
        if let Some(body) = s.strip_prefix('"') {
            let body = body
                .strip_suffix('"')
                .ok_or_else(|| ValueParseError(s.to_string()))?;
            let mut out = String::new();
            let mut chars = body.chars();
            while let Some(c) = chars.next() {
                if c == '"' {
                    return Err(ValueParseError(s.to_string()));
                }
                if c == '\\' {
                    match chars.next() {
                        Some('\\') => out.push('\\'),
                        Some('"') => out.push('"'),
                        Some('n') => out.push('\n'),
                        Some('t') => out.push('\t'),
                        _ => return Err(ValueParseError(s.to_string())),
                    }
                } else {
                    out.push(c);
                }
            }
            return Ok(Value::Text(out));
        }
        s.parse::<i64>()
            .map(Value::Int)
            .map_err(|_| ValueParseError(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_forms() {
        assert_eq!(Value::Int(-7).to_string(), "-7");
        assert_eq!(Value::Bool(true).to_string(), "true");
        assert_eq!(Value::Text("a\"b\\c\n".into()).to_string(), "\"a\\\"b\\\\c\\n\"");
    }

    #[test]
    fn parse_round_trip() {
        for v in [
            Value::Int(0),
            Value::Int(-123),
            Value::Bool(false),
            Value::Text("".into()),
            Value::Text("hi \"there\"\t\\".into()),
        ] {
            assert_eq!(Value::parse_literal(&v.to_string()).unwrap(), v);
        }
        assert!(Value::parse_literal("tru").is_err());
        assert!(Value::parse_literal("\"open").is_err());
    }
}
