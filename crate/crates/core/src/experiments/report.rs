//! Diagnostic report document.

use std::collections::BTreeMap;

use serde::Serialize;

/// One checked statistic: pass ⇔ |statistic − target| ≤ tolerance.
#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticEntry {
    pub label: String,
    pub statistic: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl DiagnosticEntry {
    pub fn new(label: &str, statistic: f64, target: f64, tolerance: f64) -> Self {
        Self {
            label: label.to_string(),
            statistic,
            target,
            tolerance,
            pass: (statistic - target).abs() <= tolerance,
        }
    }

    /// Entry passing iff `statistic ∈ [lo, hi]`, expressed as midpoint and
    /// half-width so the pass rule stays `|statistic − target| ≤ tolerance`.
    pub fn band(label: &str, statistic: f64, lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Self::new(label, statistic, 0.5 * (lo + hi), 0.5 * (hi - lo))
    }
}

/// A named diagnostic with its checked entries, informational columns and
/// the seeds that reproduce it. Maps are ordered so serialization is
/// deterministic.
#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticReport {
    pub name: String,
    pub pass: bool,
    pub replications: u64,
    pub entries: Vec<DiagnosticEntry>,
    pub info: BTreeMap<String, f64>,
    pub seeds: BTreeMap<String, u64>,
}

impl DiagnosticReport {
    pub fn new(name: &str, replications: u64, entries: Vec<DiagnosticEntry>) -> Self {
        let pass = entries.iter().all(|e| e.pass);
        Self {
            name: name.to_string(),
            pass,
            replications,
            entries,
            info: BTreeMap::new(),
            seeds: BTreeMap::new(),
        }
    }

    pub fn with_info(mut self, key: &str, value: f64) -> Self {
        self.info.insert(key.to_string(), value);
        self
    }

    pub fn with_seed(mut self, key: &str, value: u64) -> Self {
        self.seeds.insert(key.to_string(), value);
        self
    }

    pub fn entry(&self, label: &str) -> Option<&DiagnosticEntry> {
        self.entries.iter().find(|e| e.label == label)
    }
}
