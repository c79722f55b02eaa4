//! Report rendering. Both formats carry the same payload: JSON as
//! `{command, params, data}`, CSV as `# key=value` parameter comments, a
//! header row, and data rows. Reals print with 17 significant digits in
//! CSV; JSON uses the shortest representation that round-trips, so parsing
//! either format recovers identical doubles. Integers that can outgrow
//! doubles travel as decimal strings in both.

use std::collections::BTreeMap;
use std::io::Write;

use crate::CliError;

#[derive(Debug, Clone)]
pub enum Cell {
    Int(i64),
    /// Decimal string for integers that may exceed both i64 and f64.
    Big(String),
    Real(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Big(s) => s.clone(),
            Cell::Real(x) => format!("{x:.16e}"),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

pub struct Report {
    pub command: &'static str,
    pub params: BTreeMap<String, String>,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub data: serde_json::Value,
    /// Process exit code; nonzero when rows were dropped for budget reasons.
    pub exit: u8,
}

impl Report {
    pub fn emit_csv(&self, out: &mut impl Write) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::internal(format!("write failed: {e}"));
        writeln!(out, "# command={}", self.command).map_err(io)?;
        for (key, value) in &self.params {
            writeln!(out, "# {key}={value}").map_err(io)?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)
            .map_err(|e| CliError::internal(format!("csv write: {e}")))?;
        for row in &self.rows {
            debug_assert_eq!(row.len(), self.header.len());
            w.write_record(row.iter().map(Cell::render))
                .map_err(|e| CliError::internal(format!("csv write: {e}")))?;
        }
        w.flush()
            .map_err(|e| CliError::internal(format!("csv flush: {e}")))?;
        Ok(())
    }

    pub fn emit_json(&self, out: &mut impl Write) -> Result<(), CliError> {
        let body = serde_json::json!({
            "command": self.command,
            "params": self.params,
            "data": self.data,
        });
        writeln!(out, "{body}").map_err(|e| CliError::internal(format!("write failed: {e}")))
    }
}
