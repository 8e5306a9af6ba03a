//! JSON envelope, number rounding and exit codes.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use wfusion::format::{format_number, round_sig};

pub fn number(x: f64) -> String {
    format_number(x)
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 2 }
    }

    pub fn exit_code(&self) -> u8 {
        self.code
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<wfusion::Error> for CliError {
    fn from(e: wfusion::Error) -> Self {
        CliError { message: e.to_string(), code: if e.is_numerical() { 3 } else { 2 } }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::usage(format!("cannot write output: {e}"))
    }
}

pub enum Payload {
    Json(Value),
    /// Already formatted CSV, written as is.
    Text(String),
}

#[derive(Serialize)]
pub struct Envelope {
    command: &'static str,
    parameters: Value,
    results: Value,
    tool_version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl Envelope {
    pub fn new(command: &'static str, parameters: Value, seed: Option<u64>) -> Self {
        Envelope { command, parameters, results: Value::Null, tool_version: env!("CARGO_PKG_VERSION"), seed }
    }

    /// JSON payloads are wrapped in the envelope; CSV is written bare.
    pub fn emit(mut self, payload: Payload, out: Option<&Path>) -> Result<(), CliError> {
        let text = match payload {
            Payload::Text(t) => t,
            Payload::Json(results) => {
                self.results = results;
                let mut value = serde_json::to_value(&self).expect("envelope serializes");
                round_floats(&mut value);
                let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
                s.push('\n');
                s
            }
        };
        match out {
            Some(path) => fs::write(path, text)?,
            None => io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

/// Rounds every non-integer number to the library's significant digits.
fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round_sig(x))) {
                *n = x;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}
