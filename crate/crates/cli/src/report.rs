// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

/// How a command ended, mapped onto the process exit code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    /// A checked inequality or self-consistency test failed (exit 2).
    Violation(String),
    /// The instance is degenerate or infeasible for the command (exit 3).
    Degenerate(String),
}

impl Status {
    pub fn exit_code(&self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Violation(_) => 2,
            Status::Degenerate(_) => 3,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Violation(_) => "violation",
            Status::Degenerate(_) => "degenerate",
        }
    }
}

/// Command result: JSON fields plus an optional CSV rendering.
pub struct Outcome {
    pub outputs: Map<String, Value>,
    pub csv: Option<Table>,
    pub status: Status,
}

impl Outcome {
    pub fn new(outputs: Value) -> Self {
        let outputs = match outputs {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("result".into(), other);
                m
            }
        };
        Outcome { outputs, csv: None, status: Status::Pass }
    }

    pub fn with_csv(mut self, table: Table) -> Self {
        self.csv = Some(table);
        self
    }

    pub fn with_status(mut self, status: Status) -> Self {
        self.status = status;
        self
    }
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize)]
pub struct RunReport<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub instance_hash: Option<&'a str>,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<&'a str>,
    #[serde(flatten)]
    pub outputs: &'a Map<String, Value>,
    pub timings: Timings,
}

#[derive(Serialize)]
pub struct Timings {
    pub total_ms: f64,
}

impl<'a> RunReport<'a> {
    pub fn new(command: &'a str, instance_hash: Option<&'a str>, outcome: &'a Outcome, total_ms: f64) -> Self {
        let message = match &outcome.status {
            Status::Pass => None,
            Status::Violation(m) | Status::Degenerate(m) => Some(m.as_str()),
        };
        RunReport {
            command,
            version: wolff_trace::VERSION,
            instance_hash,
            status: outcome.status.label(),
            message,
            outputs: &outcome.outputs,
            timings: Timings { total_ms },
        }
    }
}

/// JSON number, or `"inf"` / `"-inf"` / `"nan"` for non-finite values.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else if x.is_nan() {
        Value::String("nan".into())
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

/// CSV cell for a real: shortest round-trip form, `inf`/`nan` spelled out.
pub fn cell(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Coordinates joined with `;` so they fit in one CSV cell.
pub fn coords(x: &[f64]) -> String {
    x.iter().map(|v| cell(*v)).collect::<Vec<_>>().join(";")
}

pub fn index_cell(ix: &[i64]) -> String {
    ix.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

pub fn emit(text: &str, out: Option<&Path>) -> std::io::Result<()> {
    match out {
        Some(path) => fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

pub fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}
