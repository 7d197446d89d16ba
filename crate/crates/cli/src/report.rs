//! Run reports: what was computed, from which inputs, and which checks passed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// One pass/fail check. `bound` states the condition on `value`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub check: String,
    pub passed: bool,
    pub value: f64,
    pub bound: String,
}

impl Verdict {
    pub fn at_most(check: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            check: check.into(),
            passed: value <= limit,
            value,
            bound: format!("<= {limit:e}"),
        }
    }

    pub fn at_least(check: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            check: check.into(),
            passed: value >= limit,
            value,
            bound: format!(">= {limit:e}"),
        }
    }

    pub fn within(check: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            check: check.into(),
            passed: (lo..=hi).contains(&value),
            value,
            bound: format!("in [{lo}, {hi}]"),
        }
    }
}

/// A diagnostic reported without a verdict, because its hypotheses were not
/// met or because it describes the model rather than checks it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Property {
    pub name: String,
    pub holds: Option<bool>,
    pub value: f64,
}

impl Property {
    pub fn new(name: impl Into<String>, holds: Option<bool>, value: f64) -> Self {
        Self {
            name: name.into(),
            holds,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    /// SHA-256 of the model file bytes followed by the command parameters.
    pub inputs_digest: String,
    pub seed: Option<u64>,
    /// File names written into the output directory.
    pub outputs: Vec<String>,
    pub verdicts: Vec<Verdict>,
    pub properties: Vec<Property>,
    pub summary: Value,
}

pub fn inputs_digest(model_bytes: &[u8], parameters: &Value) -> String {
    let mut h = Sha256::new();
    h.update(model_bytes);
    h.update(b"\n");
    h.update(parameters.to_string().as_bytes());
    h.finalize()
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

impl RunReport {
    pub fn new(command: &str, inputs_digest: String, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            inputs_digest,
            seed,
            outputs: Vec::new(),
            verdicts: Vec::new(),
            properties: Vec::new(),
            summary: Value::Null,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn file_name(&self) -> String {
        format!("{}.report.json", self.command)
    }

    /// Writes the report as pretty JSON into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(self.file_name());
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    /// Plain-text table of verdicts and properties.
    pub fn table(&self) -> String {
        let width = self
            .verdicts
            .iter()
            .map(|v| v.check.len())
            .chain(self.properties.iter().map(|p| p.name.len()))
            .max()
            .unwrap_or(0)
            .max(5);
        let mut out = String::new();
        for v in &self.verdicts {
            let tag = if v.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(
                out,
                "{tag}  {:<width$}  {:>12.4e}  {}",
                v.check, v.value, v.bound
            );
        }
        for p in &self.properties {
            let tag = match p.holds {
                Some(true) => "yes",
                Some(false) => "no",
                None => "-",
            };
            let _ = writeln!(
                out,
                "info  {:<width$}  {:>12.4e}  holds: {tag}",
                p.name, p.value
            );
        }
        out
    }
}
