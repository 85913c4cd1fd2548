//! Resolution of every nondeterministic choice: guided schedules, seeded randomness, and the
//! recording wrapper that turns either into a replayable log.

mod random;

pub use random::RandomDecider;

use crate::derive::{eval_recipe, Analysis};
use crate::terms::Term;
use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// One resolved choice point; guided schedules are sequences of these.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    /// Number of candidates offered; informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<usize>,
    /// Chosen candidate or recipe result; checked on replay when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipe: Option<Term>,
}

impl Choice {
    pub fn pick(label: &str, index: usize) -> Self {
        Choice { label: label.to_string(), index: Some(index), domain: None, value: None, recipe: None }
    }

    pub fn with_recipe(label: &str, recipe: Term) -> Self {
        Choice { label: label.to_string(), index: None, domain: None, value: None, recipe: Some(recipe) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("schedule exhausted at choice point {label}")]
    Exhausted { label: String },
    #[error("schedule infeasible at choice point {label}: {reason}")]
    Infeasible { label: String, reason: String },
}

impl OracleError {
    pub fn infeasible(label: &str, reason: impl Into<String>) -> Self {
        OracleError::Infeasible { label: label.to_string(), reason: reason.into() }
    }
}

/// Finite vocabulary the random decider and user navigation draw public constants from.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub addresses: Vec<Term>,
    pub domains: Vec<Term>,
    pub paths: Vec<Term>,
    /// URLs a user may type; nonce-free by construction.
    pub urls: Vec<Term>,
    pub ids: Vec<Term>,
    pub scripts: Vec<Term>,
    /// Extra string tokens (message tags, cookie names).
    pub tokens: Vec<Term>,
    /// Attacker-owned domains; the random decider serves pages for these.
    pub attacker_domains: Vec<Term>,
}

/// Shape a recipe's result must have to be usable at a choice point.
#[derive(Clone, Copy, Debug)]
pub enum Goal<'a> {
    /// ⟨receiver, sender, message⟩ emitted by an attacker process.
    Emission { receivers: &'a [Term], senders: &'a [Term] },
    /// ⟨receiver, message⟩ emitted by a corrupted browser.
    CorruptEmission { receivers: &'a [Term] },
    /// Full output ⟨state, cookies, localStorage, sessionStorage, command⟩ of the attacker script.
    ScriptOutput,
}

impl Goal<'_> {
    fn accepts(&self, v: &Term) -> Result<(), &'static str> {
        match self {
            Goal::Emission { receivers, senders } => match v.as_seq() {
                Some([r, s, _]) if receivers.contains(r) && senders.contains(s) => Ok(()),
                Some([_, _, _]) => Err("receiver or sender address not permitted"),
                _ => Err("emission is not a ⟨receiver, sender, message⟩ triple"),
            },
            Goal::CorruptEmission { receivers } => match v.as_seq() {
                Some([r, _]) if receivers.contains(r) => Ok(()),
                _ => Err("emission is not a ⟨receiver, message⟩ pair to a known address"),
            },
            Goal::ScriptOutput => Ok(()),
        }
    }
}

/// Everything a decider may consult to produce a recipe.
pub struct RecipeContext<'a> {
    /// Ordered knowledge; recipe variable `?x{i}` names item `i` (1-based).
    pub knowledge: &'a [Term],
    pub analysis: &'a Analysis,
    pub goal: Goal<'a>,
    pub vocab: &'a Vocabulary,
    pub max_depth: usize,
    /// Recipe used when a random decider finds nothing better.
    pub fallback: Term,
}

impl RecipeContext<'_> {
    /// Result of a recipe, provided it is well-formed, respects the nonce pool and fits the goal.
    pub fn evaluate(&self, recipe: &Term) -> Result<Term, String> {
        let v = eval_recipe(recipe, self.knowledge, self.analysis.pool()).map_err(|e| e.to_string())?;
        self.goal.accepts(&v).map_err(String::from)?;
        Ok(v)
    }
}

/// Policy answering choice points; the recorder around it handles logging.
pub trait Decider {
    fn pick(&mut self, label: &str, candidates: &[Term]) -> Result<usize, OracleError>;
    fn recipe(&mut self, label: &str, ctx: &RecipeContext<'_>) -> Result<Term, OracleError>;
}

/// Replays a schedule; every deviation from it is reported as infeasible.
#[derive(Clone, Debug, Default)]
pub struct GuidedDecider {
    entries: Vec<Choice>,
    pos: usize,
}

impl GuidedDecider {
    pub fn new(entries: Vec<Choice>) -> Self {
        GuidedDecider { entries, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.entries.len() - self.pos
    }

    fn next(&mut self, label: &str) -> Result<&Choice, OracleError> {
        let Some(entry) = self.entries.get(self.pos) else {
            return Err(OracleError::Exhausted { label: label.to_string() });
        };
        if entry.label != label {
            return Err(OracleError::infeasible(label, alloc::format!("schedule expects {}", entry.label)));
        }
        self.pos += 1;
        Ok(entry)
    }
}

impl Decider for GuidedDecider {
    fn pick(&mut self, label: &str, candidates: &[Term]) -> Result<usize, OracleError> {
        let entry = self.next(label)?;
        let Some(i) = entry.index else {
            return Err(OracleError::infeasible(label, "schedule entry has no index"));
        };
        if i >= candidates.len() {
            return Err(OracleError::infeasible(label, alloc::format!("index {i} outside {} candidates", candidates.len())));
        }
        if let Some(v) = &entry.value {
            if *v != candidates[i] {
                return Err(OracleError::infeasible(label, "scheduled value is not the candidate at that index"));
            }
        }
        Ok(i)
    }

    fn recipe(&mut self, label: &str, ctx: &RecipeContext<'_>) -> Result<Term, OracleError> {
        let entry = self.next(label)?;
        let Some(r) = entry.recipe.clone() else {
            return Err(OracleError::infeasible(label, "schedule entry has no recipe"));
        };
        let expected = entry.value.clone();
        let v = ctx.evaluate(&r).map_err(|e| OracleError::infeasible(label, e))?;
        if expected.is_some_and(|e| e != v) {
            return Err(OracleError::infeasible(label, "recipe no longer derives the scheduled message"));
        }
        Ok(r)
    }
}

/// Follows a schedule prefix, then continues with a fallback decider.
pub struct PrefixDecider<D> {
    prefix: GuidedDecider,
    rest: D,
}

impl<D: Decider> PrefixDecider<D> {
    pub fn new(prefix: Vec<Choice>, rest: D) -> Self {
        PrefixDecider { prefix: GuidedDecider::new(prefix), rest }
    }
}

impl<D: Decider> Decider for PrefixDecider<D> {
    fn pick(&mut self, label: &str, candidates: &[Term]) -> Result<usize, OracleError> {
        if self.prefix.remaining() > 0 {
            self.prefix.pick(label, candidates)
        } else {
            self.rest.pick(label, candidates)
        }
    }

    fn recipe(&mut self, label: &str, ctx: &RecipeContext<'_>) -> Result<Term, OracleError> {
        if self.prefix.remaining() > 0 {
            self.prefix.recipe(label, ctx)
        } else {
            self.rest.recipe(label, ctx)
        }
    }
}

impl<D: Decider + ?Sized> Decider for Box<D> {
    fn pick(&mut self, label: &str, candidates: &[Term]) -> Result<usize, OracleError> {
        (**self).pick(label, candidates)
    }

    fn recipe(&mut self, label: &str, ctx: &RecipeContext<'_>) -> Result<Term, OracleError> {
        (**self).recipe(label, ctx)
    }
}

/// Wraps a decider, skips trivial choices and logs every resolved one.
pub struct Oracle<'d> {
    decider: &'d mut dyn Decider,
    log: Vec<Choice>,
}

impl<'d> Oracle<'d> {
    pub fn new(decider: &'d mut dyn Decider) -> Self {
        Oracle { decider, log: Vec::new() }
    }

    /// Index into `candidates`; single-candidate points are resolved silently.
    pub fn choose(&mut self, label: &str, candidates: &[Term]) -> Result<usize, OracleError> {
        match candidates.len() {
            0 => Err(OracleError::infeasible(label, "no candidates")),
            1 => Ok(0),
            n => {
                let i = self.decider.pick(label, candidates)?;
                if i >= n {
                    return Err(OracleError::infeasible(label, "decider returned an out-of-range index"));
                }
                self.log.push(Choice {
                    label: label.to_string(),
                    index: Some(i),
                    domain: Some(n),
                    value: Some(candidates[i].clone()),
                    recipe: None,
                });
                Ok(i)
            }
        }
    }

    /// Recipe and its validated result.
    pub fn recipe(&mut self, label: &str, ctx: &RecipeContext<'_>) -> Result<(Term, Term), OracleError> {
        let r = self.decider.recipe(label, ctx)?;
        let v = ctx.evaluate(&r).map_err(|e| OracleError::infeasible(label, e))?;
        self.log.push(Choice { label: label.to_string(), index: None, domain: None, value: Some(v.clone()), recipe: Some(r.clone()) });
        Ok((r, v))
    }

    pub fn take_log(&mut self) -> Vec<Choice> {
        core::mem::take(&mut self.log)
    }

    pub fn log_len(&self) -> usize {
        self.log.len()
    }

    /// Drops log entries beyond `len`, used when a step is abandoned.
    pub fn truncate_log(&mut self, len: usize) {
        self.log.truncate(len);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derive::NoncePool;
    use alloc::vec;

    fn cands() -> Vec<Term> {
        vec![Term::lit("a"), Term::lit("b"), Term::lit("c")]
    }

    #[test]
    fn single_candidate_is_not_logged_or_consumed() {
        let mut g = GuidedDecider::new(vec![]);
        let mut o = Oracle::new(&mut g);
        assert_eq!(o.choose("x", &[Term::Top]).unwrap(), 0);
        assert!(o.take_log().is_empty());
    }

    #[test]
    fn guided_checks_label_range_and_value() {
        let mut entry = Choice::pick("x", 1);
        entry.value = Some(Term::lit("b"));
        let mut g = GuidedDecider::new(vec![entry.clone(), Choice::pick("y", 5), entry.clone()]);
        let mut o = Oracle::new(&mut g);
        assert_eq!(o.choose("x", &cands()).unwrap(), 1);
        assert!(matches!(o.choose("y", &cands()), Err(OracleError::Infeasible { .. })));
        assert!(matches!(o.choose("x", &[Term::lit("z"), Term::lit("q")]), Err(OracleError::Infeasible { .. })));
        assert!(matches!(o.choose("x", &cands()), Err(OracleError::Exhausted { .. })));
        let mut g = GuidedDecider::new(vec![entry]);
        assert!(matches!(Oracle::new(&mut g).choose("other", &cands()), Err(OracleError::Infeasible { .. })));
    }

    #[test]
    fn recorded_log_replays_under_guidance() {
        let mut g = GuidedDecider::new(vec![Choice::pick("x", 2)]);
        let mut o = Oracle::new(&mut g);
        o.choose("x", &cands()).unwrap();
        let log = o.take_log();
        assert_eq!(log[0].value, Some(Term::lit("c")));
        let mut replay = GuidedDecider::new(log);
        assert_eq!(Oracle::new(&mut replay).choose("x", &cands()).unwrap(), 2);
    }

    #[test]
    fn guided_recipe_must_fit_goal() {
        let knowledge = vec![Term::lit("m")];
        let analysis = Analysis::of(&knowledge, NoncePool::None);
        let addrs = vec![Term::addr("A")];
        let vocab = Vocabulary::default();
        let ctx = RecipeContext {
            knowledge: &knowledge,
            analysis: &analysis,
            goal: Goal::Emission { receivers: &addrs, senders: &addrs },
            vocab: &vocab,
            max_depth: 6,
            fallback: Term::empty(),
        };
        let good = Term::seq(vec![Term::addr("A"), Term::addr("A"), Term::var("x1")]);
        let bad = Term::seq(vec![Term::addr("B"), Term::addr("A"), Term::var("x1")]);
        let mut g = GuidedDecider::new(vec![Choice::with_recipe("e", good), Choice::with_recipe("e", bad)]);
        let mut o = Oracle::new(&mut g);
        let (_, v) = o.recipe("e", &ctx).unwrap();
        assert_eq!(v.at(3), Some(&Term::lit("m")));
        assert!(matches!(o.recipe("e", &ctx), Err(OracleError::Infeasible { .. })));
    }
}
