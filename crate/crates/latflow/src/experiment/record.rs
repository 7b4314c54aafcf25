//! Record persistence: a JSON-lines stream with a schema/config header and
//! a fixed-column CSV projection. Identical config and seed reproduce
//! byte-identical files; nothing time- or machine-dependent is written.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{config_hash, ConfigMap};

pub const SCHEMA: &str = "latflow.records/1";

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub key: String,
    pub status: String,
    pub data: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay: Option<Value>,
}

impl Row {
    pub fn new(key: impl Into<String>, status: impl Into<String>, data: Value) -> Self {
        Row {
            key: key.into(),
            status: status.into(),
            data,
            replay: None,
        }
    }

    pub fn with_replay(mut self, replay: Value) -> Self {
        self.replay = Some(replay);
        self
    }
}

pub struct RunOutput {
    pub rows: Vec<Row>,
    pub csv_header: &'static str,
    pub csv_lines: Vec<String>,
    /// Extra JSONL streams: (file name, lines).
    pub extra_streams: Vec<(String, Vec<String>)>,
    pub truncated: bool,
}

impl RunOutput {
    pub fn new(csv_header: &'static str) -> Self {
        RunOutput {
            rows: Vec::new(),
            csv_header,
            csv_lines: Vec::new(),
            extra_streams: Vec::new(),
            truncated: false,
        }
    }

    pub fn fail_count(&self) -> u64 {
        self.rows.iter().filter(|r| r.status == "FAIL").count() as u64
    }
}

/// Writes records.jsonl (header line + one object per row) and summary.csv
/// into the output directory.
pub fn persist(
    out_dir: &Path,
    cfg: &ConfigMap,
    output: &RunOutput,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let header = json!({
        "schema": SCHEMA,
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": config_hash(cfg),
        "config": config_value(cfg),
        "truncated": output.truncated,
    });
    let records_path = out_dir.join("records.jsonl");
    let mut f = fs::File::create(&records_path)?;
    writeln!(f, "{}", serde_json::to_string(&header)?)?;
    for row in &output.rows {
        writeln!(f, "{}", serde_json::to_string(row)?)?;
    }
    written.push(records_path);

    let csv_path = out_dir.join("summary.csv");
    let mut f = fs::File::create(&csv_path)?;
    writeln!(f, "{}", output.csv_header)?;
    for line in &output.csv_lines {
        writeln!(f, "{line}")?;
    }
    written.push(csv_path);

    for (name, lines) in &output.extra_streams {
        let p = out_dir.join(name);
        let mut f = fs::File::create(&p)?;
        for line in lines {
            writeln!(f, "{line}")?;
        }
        written.push(p);
    }
    Ok(written)
}

fn config_value(cfg: &ConfigMap) -> Value {
    let mut top = serde_json::Map::new();
    for (k, v) in &cfg.top {
        top.insert(k.clone(), Value::String(v.clone()));
    }
    let mut blocks = serde_json::Map::new();
    for (name, block) in &cfg.blocks {
        let mut m = serde_json::Map::new();
        for (k, v) in block {
            m.insert(k.clone(), Value::String(v.clone()));
        }
        blocks.insert(name.clone(), Value::Object(m));
    }
    json!({ "top": Value::Object(top), "blocks": Value::Object(blocks) })
}

/// CSV field formatting: plain decimal for finite numbers, `inf`, empty for
/// missing. Fixed column sets per scenario keep parsers trivial.
pub fn csv_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_infinite() && x > 0.0 {
        "inf".into()
    } else if x.is_infinite() {
        "-inf".into()
    } else {
        "nan".into()
    }
}
