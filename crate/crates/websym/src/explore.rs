//! Batches of independent seeded runs, optionally starting from a guided prefix.

use crate::exec::run_with;
use crate::io::{Source, TraceDoc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use websym_core::oracle::{Choice, PrefixDecider, RandomDecider};
use websym_core::scenario::{Scenario, ScenarioError};

/// Machine-readable result of an exploration.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Summary {
    pub runs: usize,
    pub steps: usize,
    /// Runs with a security violation.
    pub violations: usize,
    /// Runs with a structural invariant failure.
    pub invariant_failures: usize,
    /// Runs whose guided prefix could not be followed.
    pub infeasible_prefixes: usize,
    /// Per property, the number of runs violating it.
    pub by_property: std::collections::BTreeMap<String, usize>,
    /// Lowest-numbered run with a violation of either kind.
    pub first_violation: Option<u64>,
}

pub struct Exploration {
    pub summary: Summary,
    /// Trace of the lowest-numbered violating run.
    pub witness: Option<TraceDoc>,
}

/// `runs` seeded runs of `s`; run `i` uses ChaCha stream `i` of `seed`.
pub fn explore(s: &Scenario, seed: u64, runs: u64, prefix: Option<(&str, &[Choice])>) -> Result<Exploration, ScenarioError> {
    s.build()?;
    let docs: Vec<(u64, usize, TraceDoc)> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let doc = match prefix {
                None => run_with(s, Source::Seed { seed, run }, &mut RandomDecider::new(seed, run), true),
                Some((name, choices)) => {
                    let mut d = PrefixDecider::new(choices.to_vec(), RandomDecider::new(seed, run));
                    run_with(s, Source::Prefixed { schedule: name.to_string(), seed, run }, &mut d, true)
                }
            }
            .expect("scenario built above");
            let steps = doc.steps.len();
            // Clean runs only contribute counts; their steps are dropped early to bound memory.
            let keep = doc.security_violation() || doc.invariant_failure();
            (run, steps, if keep { doc } else { TraceDoc { steps: Vec::new(), ..doc } })
        })
        .collect();
    let mut summary = Summary { runs: docs.len(), ..Summary::default() };
    let mut witness = None;
    for (run, steps, doc) in docs {
        summary.steps += steps;
        summary.violations += usize::from(doc.security_violation());
        summary.invariant_failures += usize::from(doc.invariant_failure());
        summary.infeasible_prefixes += usize::from(doc.infeasible());
        for v in doc.verdicts.iter().filter(|v| v.is_violated()) {
            *summary.by_property.entry(v.property.clone()).or_default() += 1;
        }
        if witness.is_none() && (doc.security_violation() || doc.invariant_failure()) {
            summary.first_violation = Some(run);
            witness = Some(doc);
        }
    }
    Ok(Exploration { summary, witness })
}
