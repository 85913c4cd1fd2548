//! Scenario and trace files: JSON documents with terms embedded as canonical strings.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use websym_core::browserid::Fixes;
use websym_core::properties::Verdict;
use websym_core::runtime::{StepRecord, Status, Trace};
use websym_core::scenario::{Scenario, ScenarioError};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Schema { path: String, line: usize, column: usize, message: String },
    #[error("{path}: {source}")]
    Invalid { path: String, source: ScenarioError },
}

fn schema(path: &str, e: serde_json::Error) -> LoadError {
    LoadError::Schema { path: path.to_string(), line: e.line(), column: e.column(), message: e.to_string() }
}

/// Parses and validates a scenario document; `origin` names it in error messages.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, LoadError> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| schema(origin, e))?;
    s.validate().map_err(|source| LoadError::Invalid { path: origin.to_string(), source })?;
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, LoadError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Read { path: origin.clone(), source })?;
    parse_scenario(&text, &origin)
}

pub fn scenario_json(s: &Scenario) -> String {
    let mut out = serde_json::to_string_pretty(s).expect("scenarios serialize");
    out.push('\n');
    out
}

/// SHA-256 of the compact serialization; field order is fixed by the schema.
pub fn scenario_hash(s: &Scenario) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(s).expect("scenarios serialize")))
}

/// How the run's choices were produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Seed { seed: u64, run: u64 },
    Schedule { name: String },
    /// A guided prefix followed by seeded random choices.
    Prefixed { schedule: String, seed: u64, run: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    /// Exploration size the run belonged to; part of the hashed scenario.
    pub runs: usize,
    pub max_steps: usize,
    pub recipe_depth: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Meta {
    pub scenario: String,
    /// Hash of the scenario after the overrides recorded here were applied.
    pub scenario_hash: String,
    pub source: Source,
    pub bounds: Bounds,
    pub fixes: Fixes,
    pub stop_on_violation: bool,
}

impl Meta {
    /// Applies the recorded bounds and fixes to a freshly loaded scenario.
    pub fn apply(&self, s: &mut Scenario) {
        s.budget.runs = self.bounds.runs;
        s.budget.max_steps = self.bounds.max_steps;
        s.budget.recipe_depth = self.bounds.recipe_depth;
        s.fixes = self.fixes;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceDoc {
    pub meta: Meta,
    pub steps: Vec<StepRecord>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pending: Vec<websym_core::oracle::Choice>,
    pub verdicts: Vec<Verdict>,
}

impl TraceDoc {
    pub fn new(meta: Meta, trace: Trace, verdicts: Vec<Verdict>) -> Self {
        TraceDoc { meta, steps: trace.steps, status: trace.status, pending: trace.pending, verdicts }
    }

    pub fn trace(&self) -> Trace {
        Trace { steps: self.steps.clone(), status: self.status.clone(), pending: self.pending.clone() }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("traces serialize");
        out.push('\n');
        out
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, LoadError> {
        serde_json::from_str(text).map_err(|e| schema(origin, e))
    }

    pub fn security_violation(&self) -> bool {
        self.verdicts.iter().any(|v| v.is_violated() && v.is_security())
    }

    pub fn invariant_failure(&self) -> bool {
        self.verdicts.iter().any(|v| v.is_violated() && !v.is_security())
    }

    pub fn infeasible(&self) -> bool {
        matches!(self.status, Status::Infeasible { .. } | Status::Exhausted { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use websym_core::scenario::bundled;

    #[test]
    fn scenario_roundtrip_is_idempotent() {
        let s = bundled("fixed-sidp").unwrap();
        let text = scenario_json(&s);
        let again = parse_scenario(&text, "mem").unwrap();
        assert_eq!(again, s);
        assert_eq!(scenario_json(&again), text);
    }

    #[test]
    fn hash_covers_every_field() {
        let s = bundled("fixed-sidp").unwrap();
        let mut t = s.clone();
        t.budget.recipe_depth += 1;
        assert_ne!(scenario_hash(&s), scenario_hash(&t));
        let mut u = s.clone();
        u.fixes.sts_preload = false;
        assert_ne!(scenario_hash(&s), scenario_hash(&u));
    }

    #[test]
    fn schema_errors_carry_line_and_column() {
        let err = parse_scenario("{\n  \"name\": 3\n}", "bad.json").unwrap_err();
        assert!(matches!(err, LoadError::Schema { line: 2, .. }), "{err}");
    }

    #[test]
    fn shared_honest_address_is_rejected() {
        let mut s = bundled("fixed-sidp").unwrap();
        s.browsers[1].address = s.browsers[0].address.clone();
        assert!(matches!(parse_scenario(&scenario_json(&s), "dup.json"), Err(LoadError::Invalid { .. })));
    }
}
