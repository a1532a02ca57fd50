use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

/// Machine-readable summary written as `summary.json` after every command.
///
/// Timestamps are off by default so repeated runs leave identical files.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub command: String,
    pub config_digest: String,
    pub seed: Option<u64>,
    /// `None` for commands without a pass/fail outcome.
    pub passed: Option<bool>,
    /// Named results; `null` where a value is undefined.
    pub scalars: BTreeMap<String, Option<f64>>,
    pub notes: BTreeMap<String, String>,
    /// Files written next to this record.
    pub tables: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamps: Option<Timestamps>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Timestamps {
    pub started_unix: f64,
    pub finished_unix: f64,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl ResultRecord {
    pub fn new(command: &str, config_digest: &str, seed: Option<u64>) -> Self {
        Self {
            command: command.to_owned(),
            config_digest: config_digest.to_owned(),
            seed,
            passed: None,
            scalars: BTreeMap::new(),
            notes: BTreeMap::new(),
            tables: Vec::new(),
            timestamps: None,
        }
    }

    pub fn scalar(&mut self, name: &str, value: impl Into<Option<f64>>) -> &mut Self {
        self.scalars.insert(name.to_owned(), value.into());
        self
    }

    pub fn note(&mut self, name: &str, value: impl Into<String>) -> &mut Self {
        self.notes.insert(name.to_owned(), value.into());
        self
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("summary.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// A CSV table buffered in memory and written in one go.
pub struct Table {
    name: String,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { name: name.to_owned(), writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    /// Writes `<dir>/<name>` and registers it with the record.
    pub fn finish(self, dir: &Path, record: &mut ResultRecord) -> Result<()> {
        let bytes = self.writer.into_inner().map_err(|e| anyhow::anyhow!("flushing {}: {e}", self.name))?;
        let path = dir.join(&self.name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        record.tables.push(self.name);
        Ok(())
    }
}

/// Shortest round-trip formatting.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<impl ToString>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}
