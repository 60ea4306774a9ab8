//! Scheduler event traces.
//!
//! Every monitor interaction appends ordered records to a [`TraceBuf`].
//! The line form is stable, one record per line:
//!
//! ```text
//! seq=12 txn=3 op=deposit inst=acct req=7 event=grant field=1 mode=W
//! ```
//!
//! `seq` is a logical timestamp (a counter, never wall clock, so equal
//! seeds reproduce identical traces), `field` is 1-based, and `mode` is the
//! `N`/`R`/`W` letter. `req` identifies one operation invocation, which
//! disambiguates repeated operations of the same transaction.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::access::AccessMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Request,
    Block,
    Grant,
    Downgrade,
    Release,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Request => "request",
            EventKind::Block => "block",
            EventKind::Grant => "grant",
            EventKind::Downgrade => "downgrade",
            EventKind::Release => "release",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "request" => EventKind::Request,
            "block" => EventKind::Block,
            "grant" => EventKind::Grant,
            "downgrade" => EventKind::Downgrade,
            "release" => EventKind::Release,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub seq: u64,
    pub txn: u64,
    pub op: Arc<str>,
    pub instance: Arc<str>,
    pub req: u64,
    pub event: EventKind,
    /// 0-based internally; rendered 1-based.
    pub field: usize,
    pub mode: AccessMode,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "seq={} txn={} op={} inst={} req={} event={} field={} mode={}",
            self.seq,
            self.txn,
            self.op,
            self.instance,
            self.req,
            self.event.name(),
            self.field + 1,
            self.mode.letter(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed trace line {line}: {reason}")]
pub struct TraceParseError {
    pub line: usize,
    pub reason: String,
}

impl FromStr for TraceEvent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut seq = None;
        let mut txn = None;
        let mut op = None;
        let mut inst = None;
        let mut req = None;
        let mut event = None;
        let mut field = None;
        let mut mode = None;
        for part in s.split_whitespace() {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, found `{part}`"))?;
            match key {
                "seq" => seq = Some(value.parse::<u64>().map_err(|e| e.to_string())?),
                "txn" => txn = Some(value.parse::<u64>().map_err(|e| e.to_string())?),
                "op" => op = Some(Arc::<str>::from(value)),
                "inst" => inst = Some(Arc::<str>::from(value)),
                "req" => req = Some(value.parse::<u64>().map_err(|e| e.to_string())?),
                "event" => {
                    event =
                        Some(EventKind::parse(value).ok_or_else(|| format!("bad event `{value}`"))?)
                }
                "field" => {
                    let n = value.parse::<usize>().map_err(|e| e.to_string())?;
                    if n == 0 {
                        return Err("field indices are 1-based".to_string());
                    }
                    field = Some(n - 1);
                }
                "mode" => {
                    let c = value
                        .chars()
                        .next()
                        .filter(|_| value.len() == 1)
                        .ok_or_else(|| format!("bad mode `{value}`"))?;
                    mode =
                        Some(AccessMode::from_letter(c).ok_or_else(|| format!("bad mode `{value}`"))?)
                }
                // Unknown keys (e.g. a `run=` prefix) are ignored.
                _ => {}
            }
        }
        Ok(TraceEvent {
            seq: seq.ok_or("missing seq")?,
            txn: txn.ok_or("missing txn")?,
            op: op.ok_or("missing op")?,
            instance: inst.ok_or("missing inst")?,
            req: req.ok_or("missing req")?,
            event: event.ok_or("missing event")?,
            field: field.ok_or("missing field")?,
            mode: mode.ok_or("missing mode")?,
        })
    }
}

/// Parses a full line-delimited trace; blank lines are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<TraceEvent>, TraceParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.parse().map_err(|reason| TraceParseError {
                line: i + 1,
                reason,
            })
        })
        .collect()
}

/// An append-only event buffer with its own logical clock.
#[derive(Debug, Default)]
pub struct TraceBuf {
    next_seq: u64,
    events: Vec<TraceEvent>,
}

impl TraceBuf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        txn: u64,
        op: &Arc<str>,
        instance: &Arc<str>,
        req: u64,
        event: EventKind,
        field: usize,
        mode: AccessMode,
    ) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.events.push(TraceEvent {
            seq,
            txn,
            op: Arc::clone(op),
            instance: Arc::clone(instance),
            req,
            event,
            field,
            mode,
        });
        seq
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_and_parse_round_trip() {
        let mut buf = TraceBuf::new();
        let op: Arc<str> = Arc::from("deposit");
        let inst: Arc<str> = Arc::from("acct");
        buf.push(3, &op, &inst, 7, EventKind::Grant, 0, AccessMode::Write);
        buf.push(4, &op, &inst, 8, EventKind::Block, 2, AccessMode::Read);
        let text = buf.to_text();
        assert_eq!(
            text.lines().next().unwrap(),
            "seq=0 txn=3 op=deposit inst=acct req=7 event=grant field=1 mode=W"
        );
        let parsed = parse_trace(&text).unwrap();
        assert_eq!(parsed, buf.events());
    }

    #[test]
    fn unknown_keys_are_ignored() {
        let line = "run=2 seq=0 txn=1 op=f inst=i req=0 event=release field=1 mode=R";
        let e: TraceEvent = line.parse().unwrap();
        assert_eq!(e.event, EventKind::Release);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse_trace("seq=0 txn=1").is_err());
        assert!(parse_trace("seq=x txn=1 op=f inst=i req=0 event=grant field=1 mode=R").is_err());
        assert!(parse_trace("seq=0 txn=1 op=f inst=i req=0 event=grant field=0 mode=R").is_err());
    }
}
