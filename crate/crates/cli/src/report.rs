//! Report envelope and rendering.

use serde::Serialize;
use serde_json::Value;

use crate::config::{Format, RunConfig};
use crate::CliError;

/// Rows of plot-ready CSV.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

/// What a subcommand hands back.
#[derive(Debug)]
pub struct CommandOutput {
    pub result: Value,
    pub table: Option<Table>,
    /// Nonempty when a checked invariant failed.
    pub violations: Vec<String>,
}

impl CommandOutput {
    pub fn new(result: Value) -> Self {
        CommandOutput { result, table: None, violations: Vec::new() }
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.violations.push(what());
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub violations: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub result: Value,
    pub verdict: Verdict,
    #[serde(skip)]
    table: Option<Table>,
}

impl<'a> Report<'a> {
    pub fn new(command: &'static str, config: &'a RunConfig, out: CommandOutput) -> Self {
        Report {
            tool: "bwl",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            result: out.result,
            verdict: Verdict { pass: out.violations.is_empty(), violations: out.violations },
            table: out.table,
        }
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::invalid(e.to_string()))?;
                s.push('\n');
                Ok(s.into_bytes())
            }
            Format::Csv => {
                let table = self
                    .table
                    .as_ref()
                    .ok_or_else(|| CliError::invalid(format!("{} has no CSV form; use --format json", self.command)))?;
                let config = serde_json::to_string(self.config).map_err(|e| CliError::invalid(e.to_string()))?;
                let mut s = format!("# bwl {} {} config={config}\n", self.command, self.version);
                for v in &self.verdict.violations {
                    s.push_str(&format!("# violation: {v}\n"));
                }
                s.push_str(&table.header.join(","));
                s.push('\n');
                for row in &table.rows {
                    s.push_str(&row.join(","));
                    s.push('\n');
                }
                Ok(s.into_bytes())
            }
        }
    }
}

/// JSON has no infinities; write them as strings.
pub fn num(x: f64) -> Value {
    if x.is_infinite() {
        Value::String(if x > 0.0 { "+inf" } else { "-inf" }.into())
    } else {
        serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
    }
}

pub fn cell(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "+inf" } else { "-inf" }.into()
    } else {
        format!("{x}")
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinities_are_strings() {
        assert_eq!(num(f64::INFINITY), Value::String("+inf".into()));
        assert_eq!(num(f64::NEG_INFINITY), Value::String("-inf".into()));
        assert_eq!(num(1.5), serde_json::json!(1.5));
        assert_eq!(cell(f64::INFINITY), "+inf");
        assert_eq!(cell(0.1), "0.1");
    }
}
