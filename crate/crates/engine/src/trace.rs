//! Line-oriented run traces.
//!
//! One event per line, fields separated by tabs, structured fields as JSON:
//!
//! ```text
//! G  <iteration>  <path>  <operator>  <inputs>  <output>
//! F  <iteration>  <rule>  <slice>  <deltas>  <markers>
//! H  <steps>  quiescent|cap-reached
//! ```

use lob_core::{Ident, State};
use serde::{Deserialize, Serialize};

use crate::engine::{Firing, HaltReason};
use crate::error::EngineError;

/// A connector's gate evaluation: its operator applied to the children's enabledness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateRecord {
    /// Child indices from the top-level list.
    pub path: Vec<usize>,
    pub operator: Ident,
    pub inputs: Vec<bool>,
    pub output: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "event")]
pub enum TraceEvent {
    Gate { iteration: usize, gate: GateRecord },
    Fired(Firing),
    Halted { steps: usize, reason: HaltReason },
}

fn parse_json<T: serde::de::DeserializeOwned>(line: usize, s: &str) -> Result<T, EngineError> {
    serde_json::from_str(s).map_err(|e| EngineError::Trace { line, reason: e.to_string() })
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("trace fields serialize")
}

impl TraceEvent {
    pub fn to_line(&self) -> String {
        match self {
            TraceEvent::Gate { iteration, gate } => {
                let path: Vec<String> = gate.path.iter().map(usize::to_string).collect();
                format!("G\t{iteration}\t{}\t{}\t{}\t{}", path.join("/"), gate.operator, json(&gate.inputs), gate.output)
            }
            TraceEvent::Fired(f) => format!("F\t{}\t{}\t{}\t{}\t{}", f.iteration, f.rule, json(&f.slice), json(&f.deltas), json(&f.markers)),
            TraceEvent::Halted { steps, reason } => format!("H\t{steps}\t{}", json(reason).trim_matches('"')),
        }
    }

    /// Parses one line; `line_no` is only used in errors.
    pub fn from_line(line: &str, line_no: usize) -> Result<TraceEvent, EngineError> {
        let bad = |reason: String| EngineError::Trace { line: line_no, reason };
        let fields: Vec<&str> = line.split('\t').collect();
        let num = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("`{s}`: {e}")));
        let ident = |s: &str| Ident::new(s).map_err(|e| bad(e.to_string()));
        match fields.as_slice() {
            ["G", iteration, path, operator, inputs, output] => {
                let path = if path.is_empty() { Vec::new() } else { path.split('/').map(num).collect::<Result<_, _>>()? };
                let output = output.parse::<bool>().map_err(|e| bad(e.to_string()))?;
                Ok(TraceEvent::Gate {
                    iteration: num(iteration)?,
                    gate: GateRecord { path, operator: ident(operator)?, inputs: parse_json(line_no, inputs)?, output },
                })
            }
            ["F", iteration, rule, slice, deltas, markers] => Ok(TraceEvent::Fired(Firing {
                iteration: num(iteration)?,
                rule: ident(rule)?,
                slice: parse_json(line_no, slice)?,
                deltas: parse_json(line_no, deltas)?,
                markers: parse_json(line_no, markers)?,
            })),
            ["H", steps, reason] => Ok(TraceEvent::Halted { steps: num(steps)?, reason: parse_json(line_no, &format!("\"{reason}\""))? }),
            _ => Err(bad("unrecognized event".into())),
        }
    }
}

pub fn write_trace(events: &[TraceEvent]) -> String {
    events.iter().map(|e| e.to_line() + "\n").collect()
}

/// Parses a trace, skipping blank lines.
pub fn read_trace(text: &str) -> Result<Vec<TraceEvent>, EngineError> {
    text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| TraceEvent::from_line(l, i + 1)).collect()
}

/// Rebuilds the final state by applying every recorded delta to the initial state.
pub fn replay(initial: &State, events: &[TraceEvent]) -> State {
    let mut s = initial.clone();
    for e in events {
        if let TraceEvent::Fired(f) = e {
            f.deltas.iter().for_each(|d| s.apply(d));
        }
    }
    s
}
