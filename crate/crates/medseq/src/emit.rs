//! Canonical JSON and flat CSV renderings of result documents.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

/// Result document: the command, its resolved configuration, the result,
/// timing and the artifact version.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultDocument {
    pub command: String,
    pub config: Value,
    pub result: Value,
    pub timing: Timing,
    pub version: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub wall_clock_seconds: f64,
}

impl ResultDocument {
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("result documents are always encodable")
    }

    /// The document without its timing entry, for comparing runs.
    pub fn without_timing(&self) -> Value {
        let mut v = self.to_value();
        if let Value::Object(map) = &mut v {
            map.remove("timing");
        }
        v
    }
}

/// Canonical text: keys sorted, two-space indentation, integers verbatim,
/// other numbers with 17 significant digits, non-finite numbers as `null`.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn format_number(n: &serde_json::Number) -> String {
    if let Some(i) = n.as_i64() {
        i.to_string()
    } else if let Some(u) = n.as_u64() {
        u.to_string()
    } else {
        match n.as_f64() {
            Some(f) if f.is_finite() => format!("{f:.16e}"),
            _ => "null".into(),
        }
    }
}

fn indent(out: &mut String, level: usize) {
    out.push('\n');
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, value: &Value, level: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&format_number(n)),
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                indent(out, level + 1);
                write_value(out, item, level + 1);
            }
            indent(out, level);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                indent(out, level + 1);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[key], level + 1);
            }
            indent(out, level);
            out.push('}');
        }
    }
}

/// A flat table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Data(format!("cannot write csv: {e}"));
        w.write_record(&self.header).map_err(err)?;
        for row in &self.rows {
            w.write_record(row).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Data(format!("cannot write csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| CliError::Data(e.to_string()))
    }
}

/// CSV cell for a number: shortest round-trip form, empty when undefined.
pub fn cell(value: Option<f64>) -> String {
    match value {
        Some(v) if v.is_finite() => format!("{v}"),
        _ => String::new(),
    }
}

/// CSV cell for a JSON number.
fn value_cell(map: &Map<String, Value>, key: &str) -> String {
    match map.get(key) {
        Some(Value::Number(n)) if n.is_f64() => cell(n.as_f64()),
        Some(Value::Number(n)) => n.to_string(),
        Some(Value::String(s)) => s.clone(),
        _ => String::new(),
    }
}

/// Flattens a list of objects into a table with the given columns.
pub fn table_from_records(header: &[&str], records: &[Value]) -> Table {
    let mut t = Table::new(header);
    for r in records {
        let empty = Map::new();
        let map = r.as_object().unwrap_or(&empty);
        t.push(header.iter().map(|h| value_cell(map, h)).collect());
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_is_sorted_and_fixed_width() {
        let v = serde_json::json!({"b": 1.5, "a": [1, -0.1, null], "c": {"z": "x\"y", "e": {}}});
        let text = canonical_json(&v);
        assert_eq!(
            text,
            "{\n  \"a\": [\n    1,\n    -1.0000000000000001e-1,\n    null\n  ],\n  \"b\": 1.5000000000000000e0,\n  \"c\": {\n    \"e\": {},\n    \"z\": \"x\\\"y\"\n  }\n}\n"
        );
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(canonical_json(&back), text);
    }

    #[test]
    fn non_finite_numbers_become_null() {
        let v = serde_json::to_value(vec![f64::NAN, 2.0]).unwrap();
        assert_eq!(canonical_json(&v), "[\n  null,\n  2.0000000000000000e0\n]\n");
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = table_from_records(&["variable", "slope", "se"], &[]);
        assert_eq!(t.to_csv().unwrap(), "variable,slope,se\n");
    }
}
