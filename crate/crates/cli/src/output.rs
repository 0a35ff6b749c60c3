//! CSV tables and JSON manifests.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::RunConfig;

/// Formats a float for CSV: shortest round-trip form, `NaN` and `inf` spelled out.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// A CSV table. Every row gets a trailing `config_hash` column.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn render(&self, hash: &str) -> String {
        let mut s = self.header.join(",");
        s.push_str(",config_hash\n");
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push(',');
            s.push_str(hash);
            s.push('\n');
        }
        s
    }
}

/// One pass/fail statement of a run.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, passed: bool, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        Verdict {
            name: name.to_string(),
            passed,
            value,
            limit,
            detail: detail.into(),
        }
    }

    /// `value <= limit`
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Verdict::new(name, value <= limit, value, limit, format!("{value:e} <= {limit:e}"))
    }

    /// `value >= limit`
    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Verdict::new(name, value >= limit, value, limit, format!("{value:e} >= {limit:e}"))
    }

    fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "limit": self.limit,
            "detail": self.detail,
        })
    }
}

/// Everything a subcommand produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub verdicts: Vec<Verdict>,
    /// Command-specific numbers for the manifest.
    pub results: Map<String, Value>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn result(&mut self, key: &str, v: impl Into<Value>) {
        self.results.insert(key.to_string(), v.into());
    }
}

/// Writes `<command>_<table>.csv` per table and `<command>.json`; returns the paths.
pub fn write_outcome(
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    threads: usize,
    outcome: &Outcome,
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let hash = cfg.hash();
    let mut files = Vec::new();
    for t in &outcome.tables {
        let path = dir.join(format!("{command}_{}.csv", t.name));
        std::fs::write(&path, t.render(&hash))?;
        files.push(path);
    }
    let config: Map<String, Value> = cfg.entries().map(|(k, v)| (k.to_string(), Value::from(v))).collect();
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let manifest = json!({
        "command": command,
        "config": config,
        "config_hash": hash,
        "created_unix": created,
        "threads": threads,
        "files": files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
        "passed": outcome.passed(),
        "verdicts": outcome.verdicts.iter().map(Verdict::to_json).collect::<Vec<_>>(),
        "results": outcome.results,
    });
    let path = dir.join(format!("{command}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    files.push(path);
    Ok(files)
}
