//! Result serialization. Every command produces a list of flat records
//! plus shared metadata (tool, version, command, seed, echoed flags and
//! config). JSON output wraps everything in one envelope; CSV output
//! repeats the metadata in leading columns so each row stands alone.

use std::io::Write;
use std::path::PathBuf;

use serde_json::{json, Map, Value};

use crate::error::{usage, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn parse(text: Option<&str>, default: Format) -> CliResult<Format> {
        match text {
            None => Ok(default),
            Some("json") => Ok(Format::Json),
            Some("csv") => Ok(Format::Csv),
            Some(other) => Err(usage(format!(
                "unknown format '{other}' (expected json or csv)"
            ))),
        }
    }
}

/// Everything a command wants to report.
pub struct Report {
    pub command: &'static str,
    pub seed: Option<u64>,
    /// Command-line flags as given (post-parse, pre-merge).
    pub flags: Value,
    /// Raw config-file contents, if a config file was used.
    pub config_file: Option<Value>,
    /// Fully resolved parameters actually used.
    pub resolved: Value,
    /// Scalar summary values (exact value, coverage, ...), if any.
    pub summary: Option<Map<String, Value>>,
    /// Flat per-row records.
    pub records: Vec<Map<String, Value>>,
}

impl Report {
    pub fn write(&self, format: Format, output: Option<&PathBuf>) -> CliResult<()> {
        let mut sink: Box<dyn Write> = match output {
            Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
            None => Box::new(std::io::BufWriter::new(std::io::stdout().lock())),
        };
        match format {
            Format::Json => self.write_json(&mut sink),
            Format::Csv => self.write_csv(&mut sink),
        }
    }

    fn envelope(&self) -> Value {
        let mut top = Map::new();
        top.insert("tool".into(), json!("fockwitness"));
        top.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        top.insert("command".into(), json!(self.command));
        if let Some(seed) = self.seed {
            top.insert("seed".into(), json!(seed));
        }
        top.insert("flags".into(), self.flags.clone());
        if let Some(cfg) = &self.config_file {
            top.insert("config_file".into(), cfg.clone());
        }
        top.insert("resolved".into(), self.resolved.clone());
        if let Some(summary) = &self.summary {
            top.insert("summary".into(), Value::Object(summary.clone()));
        }
        top.insert(
            "records".into(),
            Value::Array(self.records.iter().cloned().map(Value::Object).collect()),
        );
        Value::Object(top)
    }

    fn write_json(&self, sink: &mut dyn Write) -> CliResult<()> {
        serde_json::to_writer_pretty(&mut *sink, &self.envelope())?;
        sink.write_all(b"\n")?;
        sink.flush()?;
        Ok(())
    }

    fn write_csv(&self, sink: &mut dyn Write) -> CliResult<()> {
        let mut writer = csv::Writer::from_writer(sink);
        // Union of record keys, sorted for a stable column order
        // (serde_json::Map with default features already iterates sorted,
        // but records may have heterogeneous keys).
        let mut keys: Vec<String> = Vec::new();
        for rec in &self.records {
            for k in rec.keys() {
                if !keys.iter().any(|existing| existing == k) {
                    keys.push(k.clone());
                }
            }
        }
        keys.sort();
        let summary_keys: Vec<String> = self
            .summary
            .as_ref()
            .map(|s| s.keys().cloned().collect())
            .unwrap_or_default();

        let meta = [
            ("tool", json!("fockwitness")),
            ("version", json!(env!("CARGO_PKG_VERSION"))),
            ("command", json!(self.command)),
            (
                "seed",
                self.seed.map_or(Value::Null, |s| json!(s)),
            ),
            (
                "config",
                Value::String(serde_json::to_string(&self.resolved)?),
            ),
        ];

        let mut header: Vec<String> = meta.iter().map(|(k, _)| k.to_string()).collect();
        header.extend(keys.iter().cloned());
        header.extend(summary_keys.iter().map(|k| format!("summary_{k}")));
        writer.write_record(&header)?;

        for rec in &self.records {
            let mut row: Vec<String> = meta.iter().map(|(_, v)| csv_cell(v)).collect();
            for k in &keys {
                row.push(rec.get(k).map_or_else(String::new, csv_cell));
            }
            if let Some(summary) = &self.summary {
                for k in &summary_keys {
                    row.push(summary.get(k).map_or_else(String::new, csv_cell));
                }
            }
            writer.write_record(&row)?;
        }
        // A summary with no records still deserves a row.
        if self.records.is_empty() {
            if let Some(summary) = &self.summary {
                let mut row: Vec<String> = meta.iter().map(|(_, v)| csv_cell(v)).collect();
                row.extend(keys.iter().map(|_| String::new()));
                for k in &summary_keys {
                    row.push(summary.get(k).map_or_else(String::new, csv_cell));
                }
                writer.write_record(&row)?;
            }
        }
        writer.flush()?;
        Ok(())
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        other => other.to_string(),
    }
}

/// Render a complex number for a record: a two-element [re, im] array.
pub fn complex_value(z: num_complex::Complex64) -> Value {
    json!([z.re, z.im])
}

/// Format a float so that round-tripping through the record is exact.
pub fn float_value(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}
