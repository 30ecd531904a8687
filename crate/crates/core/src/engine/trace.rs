//! Slot-indexed trace events and their JSON-lines encoding.
//!
//! Each line is one object `{"slot", "node", "kind", "payload"}` where `kind`
//! is one of
//!
//! - `intent`: `node` asked to transmit; payload `{"probability"}`.
//! - `transmit`: the coin came up; payload `{"message"}`.
//! - `deliver`: `node` decoded a message; payload `{"sender", "message"}`.
//!   Every delivery has a `transmit` event of the sender in the same slot.
//! - `state`: protocol phase change; payload `{"from", "to"}`.
//! - `terminated`: the node fixed its output; payload `{"color"}`.
//!
//! Within a slot, the polled nodes' `intent`, `state` and `terminated`
//! events come first in ascending node order, followed by the slot's
//! `transmit` and then `deliver` events.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{Color, Error, NodeId, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub slot: u64,
    pub node: NodeId,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    Intent { probability: f64 },
    Transmit { message: Value },
    Deliver { sender: NodeId, message: Value },
    State { from: String, to: String },
    Terminated { color: Option<Color> },
}

pub fn write_trace<W: Write>(events: &[TraceEvent], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for event in events {
        serde_json::to_writer(&mut out, event)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace_file(events: &[TraceEvent], path: impl AsRef<Path>) -> Result<()> {
    write_trace(events, std::fs::File::create(path)?)
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceEvent>> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        events.push(event);
    }
    Ok(events)
}

pub fn read_trace_file(path: impl AsRef<Path>) -> Result<Vec<TraceEvent>> {
    read_trace(std::io::BufReader::new(std::fs::File::open(path)?))
}
