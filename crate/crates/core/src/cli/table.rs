//! Tabular output shared by every subcommand.
//!
//! CSV files start with `#` comment lines echoing the schema version, the
//! resolved configuration and any summary values, followed by an RFC-4180
//! table. JSON output carries the same content with every number written as a
//! decimal string.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Shortest round-trip decimal form of a float.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Key/value lines reported ahead of the table.
    pub summary: Vec<(String, String)>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            ..Table::default()
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| num(x)).collect());
    }

    pub fn note(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.summary.push((key.into(), value.into()));
    }

    pub fn write(&self, out: &mut dyn Write, format: Format, config: &Value) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(out, config),
            Format::Json => self.write_json(out, config),
        }
    }

    fn write_csv(&self, out: &mut dyn Write, config: &Value) -> Result<()> {
        writeln!(out, "# multidicke {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(out, "# schema_version: {SCHEMA_VERSION}")?;
        writeln!(out, "# config: {}", serde_json::to_string(config)?)?;
        for (k, v) in &self.summary {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn write_json(&self, out: &mut dyn Write, config: &Value) -> Result<()> {
        let summary: serde_json::Map<String, Value> =
            self.summary.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "generator": format!("multidicke {}", env!("CARGO_PKG_VERSION")),
            "config": config,
            "summary": summary,
            "columns": self.columns,
            "rows": self.rows,
        });
        serde_json::to_writer_pretty(&mut *out, &doc)?;
        writeln!(out)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(["a", "b"]);
        t.push_nums(&[0.1, 2.0]);
        t.push(vec!["x,y".into(), "1".into()]);
        t.note("peak", "3");
        let mut buf = Vec::new();
        t.write(&mut buf, Format::Csv, &json!({"n": 2})).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("# schema_version: 1\n"));
        assert!(text.contains("# config: {\"n\":2}\n"));
        assert!(text.ends_with("a,b\r\n0.1,2.0\r\n\"x,y\",1\r\n"));
    }

    #[test]
    fn json_numbers_are_strings() {
        let mut t = Table::new(["v"]);
        t.push_nums(&[1e-300]);
        let mut buf = Vec::new();
        t.write(&mut buf, Format::Json, &json!({})).unwrap();
        let v: Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["rows"][0][0], "1e-300");
        assert_eq!(v["schema_version"], 1);
    }

    #[test]
    fn special_values() {
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(0.5), "0.5");
    }
}
