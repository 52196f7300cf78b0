use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use towb::{Check, CheckStatus};

/// One run: config echo, named results and per-check statuses.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub config: RunConfig,
    pub results: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            config: config.clone(),
            results: BTreeMap::new(),
            checks: Vec::new(),
            error: None,
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.results.insert(key.to_string(), v);
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn status(&self) -> &'static str {
        if self.error.is_some() {
            "ERROR"
        } else if self.checks.iter().any(Check::failed) {
            "FAIL"
        } else {
            "PASS"
        }
    }

    /// Pretty JSON with every object's keys sorted.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report is serialisable");
        if let Value::Object(map) = &mut v {
            map.insert("status".into(), Value::String(self.status().into()));
        }
        let mut s = serde_json::to_string_pretty(&sorted(v)).expect("json");
        s.push('\n');
        s
    }

    /// Short human-readable lines for the terminal.
    pub fn summary(&self) -> String {
        let mut out = format!("{}: {}\n", self.command, self.status());
        for c in &self.checks {
            let status = match &c.status {
                CheckStatus::Pass => "PASS".to_string(),
                CheckStatus::Fail => "FAIL".to_string(),
                CheckStatus::Skipped(r) => format!("SKIPPED ({r})"),
            };
            out += &format!("  {:<24} {status:<10} residual {:.3e} tol {:.1e}\n", c.name, c.residual, c.tolerance);
        }
        for (k, v) in &self.results {
            if !v.is_array() && !v.is_object() {
                out += &format!("  {k} = {v}\n");
            }
        }
        if let Some(e) = &self.error {
            out += &format!("  error: {e}\n");
        }
        out
    }
}

fn sorted(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let ordered: BTreeMap<String, Value> = map.into_iter().map(|(k, v)| (k, sorted(v))).collect();
            Value::Object(ordered.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sorted).collect()),
        other => other,
    }
}

/// Two-column `x value` text, one pair per line.
pub fn write_plot(dir: &Path, name: &str, rows: &[(f64, f64)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
    for (x, y) in rows {
        writeln!(f, "{x} {y}")?;
    }
    f.flush()
}
