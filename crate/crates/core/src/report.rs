//! Run reports: named pass/fail checks with witnesses, instance
//! statistics, and timing, rendered as JSON or text.
//!
//! A report collects the outcome of one command or suite run. Checks are
//! appended in execution order; a failed check should carry a witness
//! string concrete enough to replay the failure (typically a seed and the
//! offending instance or pair). The JSON and text renderings are views of
//! the same data and always agree on the overall verdict.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Outcome of a single named check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    /// What was checked.
    pub name: String,
    /// Whether the check held.
    pub pass: bool,
    /// A replayable description of the failure, when there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

/// Outcome of a command run: the command echoed back, the seed in play,
/// the checks performed, instance statistics, and elapsed wall time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    /// The command this report describes.
    pub command: String,
    /// The seed all randomness flowed through, when the run used one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Checks in execution order.
    pub checks: Vec<CheckResult>,
    /// Instance statistics: sizes, heights, counts.
    pub stats: BTreeMap<String, serde_json::Value>,
    /// Wall time of the run in milliseconds.
    pub elapsed_ms: u128,
}

impl RunReport {
    /// Starts an empty report for `command`.
    pub fn new(command: &str) -> Self {
        RunReport {
            command: command.to_string(),
            seed: None,
            checks: Vec::new(),
            stats: BTreeMap::new(),
            elapsed_ms: 0,
        }
    }

    /// Records the seed the run used.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Appends a check outcome; `witness` is kept only on failure.
    pub fn check(&mut self, name: &str, pass: bool, witness: Option<String>) {
        self.checks.push(CheckResult {
            name: name.to_string(),
            pass,
            witness: if pass { None } else { witness },
        });
    }

    /// Records a statistic about the instances the run touched.
    pub fn stat(&mut self, name: &str, value: serde_json::Value) {
        self.stats.insert(name.to_string(), value);
    }

    /// Whether every check passed.
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Process exit code for this report: zero on pass, one on failure.
    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            0
        } else {
            1
        }
    }

    /// Serializes the report as pretty JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Parses a report from JSON.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Renders the report as human-readable text with one line per check.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "command: {}", self.command).expect("writes");
        if let Some(seed) = self.seed {
            writeln!(out, "seed: {seed}").expect("writes");
        }
        for c in &self.checks {
            let verdict = if c.pass { "pass" } else { "FAIL" };
            match &c.witness {
                Some(w) => writeln!(out, "  [{verdict}] {} ({w})", c.name).expect("writes"),
                None => writeln!(out, "  [{verdict}] {}", c.name).expect("writes"),
            }
        }
        for (k, v) in &self.stats {
            writeln!(out, "  stat {k} = {v}").expect("writes");
        }
        writeln!(out, "elapsed: {} ms", self.elapsed_ms).expect("writes");
        writeln!(
            out,
            "result: {}",
            if self.pass() { "pass" } else { "FAIL" }
        )
        .expect("writes");
        out
    }
}
