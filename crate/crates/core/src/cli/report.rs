use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    /// Passes when `value < tolerance`.
    #[serde(rename = "<")]
    Below,
    /// Passes when `value > tolerance`.
    #[serde(rename = ">")]
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl Record {
    pub fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Record {
            name: name.to_string(),
            value,
            tolerance,
            bound: Bound::Below,
            pass: value < tolerance,
        }
    }

    pub fn above(name: &str, value: f64, tolerance: f64) -> Self {
        Record {
            name: name.to_string(),
            value,
            tolerance,
            bound: Bound::Above,
            pass: value > tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

/// One acceptance criterion judged by the named records; `pass` is unset
/// when none of them applies to the instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: String,
    pub records: Vec<String>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub instance_hash: Option<String>,
    pub records: Vec<Record>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub criteria: Vec<Criterion>,
    pub error: Option<ErrorRecord>,
    pub environment: Environment,
    pub config: RunConfig,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Report {
            command: command.to_string(),
            instance_hash: None,
            records: Vec::new(),
            criteria: Vec::new(),
            error: None,
            environment: Environment::current(),
            config: config.clone(),
        }
    }

    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.records.iter().all(|r| r.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.json", self.command)), self.to_json()? + "\n")?;
        Ok(())
    }

    /// One line per record.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let rel = match r.bound {
                Bound::Below => "<",
                Bound::Above => ">",
            };
            out += &format!(
                "{} {:<28} {:.3e} {rel} {:.1e}\n",
                if r.pass { "PASS" } else { "FAIL" },
                r.name,
                r.value,
                r.tolerance
            );
        }
        for c in &self.criteria {
            let status = match c.pass {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "N/A ",
            };
            out += &format!("{status} {} ({})\n", c.id, c.records.join(", "));
        }
        if let Some(e) = &self.error {
            out += &format!("ERROR {}: {}\n", e.kind, e.message);
        }
        out
    }
}
