//! A scripted decider: steers a run through a planned sequence of choices so that the recorded
//! oracle log becomes a guided schedule.

use std::collections::VecDeque;
use websym_core::oracle::{Decider, OracleError, RecipeContext};
use websym_core::{normalize, Term};

/// Accepts a candidate given its index and term.
pub type Matcher = Box<dyn Fn(usize, &Term) -> bool>;
/// Builds the concrete term a recipe must produce; the director synthesizes the recipe.
pub type Target = Box<dyn Fn(&RecipeContext<'_>) -> Option<Term>>;

enum Item {
    /// `optional` items are skipped when the oracle resolves that choice silently.
    Pick { label: &'static str, what: String, matcher: Matcher, optional: bool },
    Recipe { label: &'static str, what: String, target: Target },
}

impl Item {
    fn label(&self) -> &'static str {
        match self {
            Item::Pick { label, .. } | Item::Recipe { label, .. } => label,
        }
    }

    fn what(&self) -> &str {
        match self {
            Item::Pick { what, .. } | Item::Recipe { what, .. } => what,
        }
    }
}

#[derive(Default)]
pub struct Director {
    items: VecDeque<Item>,
}

impl Director {
    pub fn new() -> Self {
        Director::default()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn pick(&mut self, label: &'static str, what: impl Into<String>, matcher: impl Fn(usize, &Term) -> bool + 'static) -> &mut Self {
        self.items.push_back(Item::Pick { label, what: what.into(), matcher: Box::new(matcher), optional: false });
        self
    }

    /// A pick that may be resolved silently because it has a single candidate.
    pub fn maybe(&mut self, label: &'static str, what: impl Into<String>, matcher: impl Fn(usize, &Term) -> bool + 'static) -> &mut Self {
        self.items.push_back(Item::Pick { label, what: what.into(), matcher: Box::new(matcher), optional: true });
        self
    }

    pub fn recipe(&mut self, label: &'static str, what: impl Into<String>, target: impl Fn(&RecipeContext<'_>) -> Option<Term> + 'static) -> &mut Self {
        self.items.push_back(Item::Recipe { label, what: what.into(), target: Box::new(target) });
        self
    }

    /// Drops optional items that do not match `label`; errors on a mandatory mismatch.
    fn advance(&mut self, label: &str) -> Result<Item, OracleError> {
        loop {
            let Some(head) = self.items.pop_front() else { return Err(OracleError::Exhausted { label: label.to_string() }) };
            if head.label() == label {
                return Ok(head);
            }
            if matches!(head, Item::Pick { optional: true, .. }) {
                continue;
            }
            let reason = format!("plan expected {} at {}", head.what(), head.label());
            self.items.push_front(head);
            return Err(OracleError::infeasible(label, reason));
        }
    }
}

impl Decider for Director {
    fn pick(&mut self, label: &str, candidates: &[Term]) -> Result<usize, OracleError> {
        match self.advance(label)? {
            Item::Pick { what, matcher, .. } => candidates
                .iter()
                .enumerate()
                .position(|(i, c)| matcher(i, c))
                .ok_or_else(|| OracleError::infeasible(label, format!("no candidate for {what}"))),
            Item::Recipe { what, .. } => Err(OracleError::infeasible(label, format!("plan expected recipe {what}"))),
        }
    }

    fn recipe(&mut self, label: &str, ctx: &RecipeContext<'_>) -> Result<Term, OracleError> {
        match self.advance(label)? {
            Item::Recipe { what, target, .. } => {
                let t = target(ctx).ok_or_else(|| OracleError::infeasible(label, format!("no target for {what}")))?;
                ctx.analysis.synthesize(&normalize(&t)).ok_or_else(|| OracleError::infeasible(label, format!("{what}: {t} is not derivable")))
            }
            Item::Pick { what, .. } => Err(OracleError::infeasible(label, format!("plan expected pick {what}"))),
        }
    }
}
