//! A run directory: `<out>/<run id>/` holds the effective configuration, every
//! artifact, and one record per command. Records double as cache entries.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use bsr_core::config::RunConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Done,
    Failed,
}

/// What a command did: when, with which arguments, what it wrote, and its verdict.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub config_hash: String,
    pub command: String,
    pub args: Value,
    pub started: u64,
    pub finished: u64,
    pub status: Status,
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub error: Option<String>,
}

pub struct RunDir {
    pub root: PathBuf,
    pub run_id: String,
    pub config_hash: String,
    artifacts: Vec<PathBuf>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunDir {
    pub fn open(out: &Path, effective: &RunConfig) -> Result<Self> {
        let run_id = effective.run_id();
        let root = out.join(&run_id);
        fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        let mut dir = Self { root, run_id, config_hash: effective.config_hash(), artifacts: Vec::new() };
        dir.write_raw("effective-config.json", &(effective.to_json() + "\n"))?;
        dir.artifacts.clear();
        Ok(dir)
    }

    pub fn header(&self) -> String {
        format!("# run_id {} effective_config_sha256 {}\n", self.run_id, self.config_hash)
    }

    fn write_raw(&mut self, rel: &str, body: &str) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.artifacts.push(PathBuf::from(rel));
        Ok(path)
    }

    /// CSV with the run header comment on the first line.
    pub fn csv(&mut self, rel: &str, body: &str) -> Result<PathBuf> {
        let text = self.header() + body;
        self.write_raw(rel, &text)
    }

    /// JSON object with `run_id` and `effective_config_sha256` ahead of the payload fields.
    pub fn json(&mut self, rel: &str, payload: Value) -> Result<PathBuf> {
        let mut obj = serde_json::Map::new();
        obj.insert("run_id".into(), Value::String(self.run_id.clone()));
        obj.insert("effective_config_sha256".into(), Value::String(self.config_hash.clone()));
        match payload {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("data".into(), other);
            }
        }
        self.write_raw(rel, &(serde_json::to_string_pretty(&Value::Object(obj))? + "\n"))
    }

    /// Writes a document verbatim (it already carries its run id).
    pub fn document(&mut self, rel: &str, text: &str) -> Result<PathBuf> {
        self.write_raw(rel, text)
    }

    fn record_path(&self, command: &str) -> PathBuf {
        self.root.join("records").join(format!("{command}.json"))
    }

    fn failed_marker(&self, command: &str) -> PathBuf {
        self.root.join(format!("{command}.failed"))
    }

    /// A finished record for the same command and arguments, if any.
    pub fn cached(&self, command: &str, args: &Value) -> Option<RunRecord> {
        let text = fs::read_to_string(self.record_path(command)).ok()?;
        let rec: RunRecord = serde_json::from_str(&text).ok()?;
        (matches!(rec.status, Status::Done) && &rec.args == args && rec.config_hash == self.config_hash).then_some(rec)
    }

    pub fn finish(&mut self, command: &str, args: Value, started: u64, outcome: &Result<i32>) -> Result<RunRecord> {
        let (status, exit_code, error) = match outcome {
            Ok(code) => (Status::Done, *code, None),
            Err(e) => (Status::Failed, 3, Some(format!("{e:#}"))),
        };
        let marker = self.failed_marker(command);
        match &error {
            Some(msg) => fs::write(&marker, format!("{msg}\n"))?,
            None if marker.exists() => fs::remove_file(&marker)?,
            None => {}
        }
        let rec = RunRecord {
            run_id: self.run_id.clone(),
            config_hash: self.config_hash.clone(),
            command: command.into(),
            args,
            started,
            finished: now(),
            status,
            exit_code,
            artifacts: std::mem::take(&mut self.artifacts),
            error,
        };
        let path = self.record_path(command);
        fs::create_dir_all(path.parent().expect("records dir"))?;
        fs::write(&path, serde_json::to_string_pretty(&rec)? + "\n")?;
        Ok(rec)
    }

    pub fn started() -> u64 {
        now()
    }
}
