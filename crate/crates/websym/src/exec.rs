//! Monitored runs from a seed or a schedule, and replay of recorded traces.

use crate::io::{scenario_hash, Bounds, Meta, Source, TraceDoc};
use websym_core::oracle::{Choice, Decider, GuidedDecider, Oracle, OracleError, RandomDecider, RecipeContext};
use websym_core::properties::{Monitors, Selection};
use websym_core::runtime::{run, Configuration, Status, World};
use websym_core::scenario::{Scenario, ScenarioError};
use websym_core::Term;

pub const ALL_MONITORS: Selection = Selection { security: true, structural: true };

fn meta(s: &Scenario, source: Source, stop_on_violation: bool) -> Meta {
    Meta {
        scenario: s.name.clone(),
        scenario_hash: scenario_hash(s),
        source,
        bounds: Bounds { runs: s.budget.runs, max_steps: s.budget.max_steps, recipe_depth: s.budget.recipe_depth },
        fixes: s.fixes,
        stop_on_violation,
    }
}

/// A finished run with the monitors and configuration it ended in.
pub struct Monitored {
    pub doc: TraceDoc,
    pub monitors: Monitors,
    pub world: World,
    pub config: Configuration,
}

/// Runs `s` under every monitor with choices from `decider`.
pub fn run_monitored(s: &Scenario, source: Source, decider: &mut dyn Decider, stop_on_violation: bool) -> Result<Monitored, ScenarioError> {
    let (world, mut config) = s.build()?;
    let mut monitors = Monitors::new(ALL_MONITORS, stop_on_violation);
    let mut oracle = Oracle::new(decider);
    let trace = run(&world, &mut config, &mut oracle, s.budget.max_steps, &mut monitors);
    let doc = TraceDoc::new(meta(s, source, stop_on_violation), trace, monitors.verdicts());
    Ok(Monitored { doc, monitors, world, config })
}

pub fn run_with(s: &Scenario, source: Source, decider: &mut dyn Decider, stop_on_violation: bool) -> Result<TraceDoc, ScenarioError> {
    Ok(run_monitored(s, source, decider, stop_on_violation)?.doc)
}

pub fn run_seed(s: &Scenario, seed: u64, run: u64, stop_on_violation: bool) -> Result<TraceDoc, ScenarioError> {
    run_with(s, Source::Seed { seed, run }, &mut RandomDecider::new(seed, run), stop_on_violation)
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("scenario {scenario} has no schedule named {name}")]
    UnknownSchedule { scenario: String, name: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Named schedule of `s`.
pub fn schedule<'s>(s: &'s Scenario, name: &str) -> Result<&'s [Choice], RunError> {
    s.schedules.get(name).map(Vec::as_slice).ok_or_else(|| RunError::UnknownSchedule { scenario: s.name.clone(), name: name.to_string() })
}

/// Step bound that never cuts a schedule short: every step resolves at least one event choice.
pub fn schedule_bound(choices: &[Choice]) -> usize {
    choices.len() + 1
}

/// Runs a named schedule within `s.budget.max_steps`.
pub fn run_schedule(s: &Scenario, name: &str) -> Result<TraceDoc, RunError> {
    let choices = schedule(s, name)?.to_vec();
    Ok(run_with(s, Source::Schedule { name: name.to_string() }, &mut GuidedDecider::new(choices), false)?)
}

/// Replays a choice log; once the log runs out it repeats the refusal that ended the recorded run.
struct ReplayDecider {
    log: GuidedDecider,
    end: Option<(String, String)>,
}

impl ReplayDecider {
    fn new(doc: &TraceDoc) -> Self {
        let end = match &doc.status {
            Status::Infeasible { label, reason, .. } => Some((label.clone(), reason.clone())),
            _ => None,
        };
        ReplayDecider { log: GuidedDecider::new(doc.trace().schedule()), end }
    }

    fn refuse(&self, label: &str, e: OracleError) -> OracleError {
        match (&e, &self.end) {
            (OracleError::Exhausted { .. }, Some((l, reason))) if l == label => OracleError::infeasible(label, reason.clone()),
            _ => e,
        }
    }
}

impl Decider for ReplayDecider {
    fn pick(&mut self, label: &str, candidates: &[Term]) -> Result<usize, OracleError> {
        self.log.pick(label, candidates).map_err(|e| self.refuse(label, e))
    }

    fn recipe(&mut self, label: &str, ctx: &RecipeContext<'_>) -> Result<Term, OracleError> {
        self.log.recipe(label, ctx).map_err(|e| self.refuse(label, e))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("scenario hash {found} does not match the trace's {expected}")]
    HashMismatch { expected: String, found: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Identical,
    /// First step whose record differs; equal to the step count when only the ending differs.
    Diverged { step: usize, detail: String },
}

/// Re-executes `doc`'s choice log on `s` after applying the recorded overrides.
pub fn replay(s: &Scenario, doc: &TraceDoc, original: &str) -> Result<(TraceDoc, Outcome), ReplayError> {
    let mut s = s.clone();
    doc.meta.apply(&mut s);
    let found = scenario_hash(&s);
    if found != doc.meta.scenario_hash {
        return Err(ReplayError::HashMismatch { expected: doc.meta.scenario_hash.clone(), found });
    }
    let mut decider = ReplayDecider::new(doc);
    let again = run_with(&s, doc.meta.source.clone(), &mut decider, doc.meta.stop_on_violation)?;
    let outcome = if again.to_json() == original { Outcome::Identical } else { first_divergence(doc, &again) };
    Ok((again, outcome))
}

fn first_divergence(recorded: &TraceDoc, again: &TraceDoc) -> Outcome {
    let common = recorded.steps.len().min(again.steps.len());
    if let Some(i) = (0..common).find(|&i| recorded.steps[i] != again.steps[i]) {
        return Outcome::Diverged { step: i, detail: format!("step {i} recomputes as {} <- {}", again.steps[i].process, again.steps[i].event.to_term()) };
    }
    let detail = if recorded.steps.len() != again.steps.len() {
        format!("recorded {} steps, replay produced {} ending {:?}", recorded.steps.len(), again.steps.len(), again.status)
    } else if recorded.status != again.status {
        format!("status {:?} recomputes as {:?}", recorded.status, again.status)
    } else if recorded.verdicts != again.verdicts {
        "verdicts differ".to_string()
    } else {
        "serialization differs".to_string()
    };
    Outcome::Diverged { step: common, detail }
}

/// Recorded choices of a trace as a reusable schedule.
pub fn schedule_of(doc: &TraceDoc) -> Vec<Choice> {
    doc.trace().schedule()
}
