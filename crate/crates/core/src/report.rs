//! Structured results of verification runs.

use serde::Serialize;

use crate::sampling::{SamplingInfo, Worst};

/// One named residual compared against a tolerance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Index into the sample set where the residual was attained.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_point: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckEntry {
    /// `pass` is `residual <= tolerance`; NaN never passes.
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        CheckEntry {
            name: name.into(),
            residual,
            tolerance,
            pass: residual <= tolerance,
            worst_point: None,
            note: None,
        }
    }

    pub fn from_worst(name: impl Into<String>, worst: &Worst, tolerance: f64) -> Self {
        CheckEntry { worst_point: worst.index, ..CheckEntry::new(name, worst.value, tolerance) }
    }

    /// A check that fails outright, e.g. a structural precondition.
    pub fn failed(name: impl Into<String>, note: impl Into<String>) -> Self {
        CheckEntry {
            name: name.into(),
            residual: f64::INFINITY,
            tolerance: 0.0,
            pass: false,
            worst_point: None,
            note: Some(note.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub checks: Vec<CheckEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingInfo>,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(checks: Vec<CheckEntry>, sampling: Option<SamplingInfo>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        CheckReport { checks, sampling, pass }
    }

    pub fn get(&self, name: &str) -> Option<&CheckEntry> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn extend(&mut self, other: CheckReport) {
        self.checks.extend(other.checks);
        self.pass = self.checks.iter().all(|c| c.pass);
    }
}
