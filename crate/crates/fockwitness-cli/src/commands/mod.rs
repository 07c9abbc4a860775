//! Subcommand implementations.

pub mod m0;
pub mod scan;
pub mod shots;
pub mod witness;

use std::path::PathBuf;

use serde_json::{json, Map, Value};

use fockwitness::witness::WitnessResult;

use crate::config::{load_config, FileConfig};
use crate::error::CliResult;
use crate::output::{float_value, Format};

/// Global flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Globals {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
}

/// Globals merged with the config file, plus the raw file for echoing.
pub struct Context {
    pub raw_config: Option<Value>,
    pub file: FileConfig,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    format: Option<String>,
    pub output: Option<PathBuf>,
}

impl Context {
    pub fn new(globals: &Globals) -> CliResult<Self> {
        let (raw_config, file) = match &globals.config {
            Some(path) => {
                let (raw, parsed) = load_config(path)?;
                (Some(raw), parsed)
            }
            None => (None, FileConfig::default()),
        };
        let seed = globals.seed.or(file.seed);
        let threads = globals.threads.or(file.threads);
        let format = globals.format.clone().or_else(|| file.format.clone());
        Ok(Context {
            raw_config,
            file,
            seed,
            threads,
            format,
            output: globals.output.clone(),
        })
    }

    pub fn format(&self, default: Format) -> CliResult<Format> {
        Format::parse(self.format.as_deref(), default)
    }
}

/// Flatten a witness evaluation into record fields.
pub fn witness_fields(rec: &mut Map<String, Value>, result: &WitnessResult) {
    rec.insert("value".into(), float_value(result.value));
    rec.insert("first".into(), float_value(result.first));
    rec.insert("second".into(), float_value(result.second));
    rec.insert(
        "epsilon_mismatch".into(),
        result.epsilon.map_or(Value::Null, float_value),
    );
    rec.insert("provenance".into(), json!(result.provenance.label()));
    rec.insert("witnessed".into(), json!(result.witnessed));
    rec.insert(
        "sound".into(),
        result.sound.map_or(Value::Null, |s| json!(s)),
    );
    if let Some(se) = result.metadata.standard_error {
        rec.insert("standard_error".into(), float_value(se));
    }
    if let Some(s) = result.metadata.shots_per_setting {
        rec.insert("shots_per_setting".into(), json!(s));
    }
    if let Some(s) = result.metadata.settings {
        rec.insert("settings".into(), json!(s));
    }
    if !result.metadata.notes.is_empty() {
        rec.insert("notes".into(), json!(result.metadata.notes.join("; ")));
    }
}

/// `flags` echo for the report: the command's own parameter struct,
/// serialized with `None` fields omitted.
pub fn echo_flags<T: serde::Serialize>(flags: &T) -> CliResult<Value> {
    Ok(serde_json::to_value(flags)?)
}
