//! Machine-readable check reports.
//!
//! Every diagnostic emits the same flat record: which check ran, on what
//! inputs, which constants were fitted, the worst residual seen, and a
//! pass flag. Key order is fixed so serialized reports are byte-stable
//! across runs with identical inputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{Error, Result};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    /// Configuration the check ran on (grids, horizons, tolerances).
    pub inputs: BTreeMap<String, Value>,
    /// Constants fitted or measured by the check.
    pub constants: BTreeMap<String, f64>,
    pub worst_residual: f64,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(check: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            inputs: BTreeMap::new(),
            constants: BTreeMap::new(),
            worst_residual: 0.0,
            pass: true,
        }
    }

    pub fn input(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.inputs.insert(key.into(), value.into());
        self
    }

    pub fn constant(mut self, key: impl Into<String>, value: f64) -> Self {
        self.constants.insert(key.into(), value);
        self
    }

    pub fn residual(mut self, worst: f64) -> Self {
        self.worst_residual = worst;
        self
    }

    pub fn passed(mut self, ok: bool) -> Self {
        self.pass = ok;
        self
    }
}

/// All checks emitted by one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    pub checks: Vec<CheckReport>,
}

impl RunReport {
    pub fn new(experiment: impl Into<String>) -> Self {
        Self { experiment: experiment.into(), checks: Vec::new() }
    }

    pub fn push(&mut self, check: CheckReport) {
        self.checks.push(check);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("report serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("report parse failed: {e}")))
    }
}
