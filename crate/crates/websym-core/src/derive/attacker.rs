//! Generic attacker process: records everything it receives and emits derivable messages.

use super::{Analysis, NoncePool};
use crate::oracle::{Goal, Oracle, OracleError, RecipeContext};
use crate::runtime::{Emission, World};
use crate::terms::{Term, Text};
use alloc::vec::Vec;

/// Upper bound on messages emitted per processing step.
pub const MAX_EMISSIONS: usize = 3;

#[derive(Clone, Debug)]
pub struct AttackerState {
    pub owner: Text,
    /// Addresses this process listens on.
    pub listen: Vec<Term>,
    /// Addresses it may use as sender.
    pub senders: Vec<Term>,
    /// Initial knowledge: own domains with private keys, all public keys.
    pub static_knowledge: Vec<Term>,
    /// Received ⟨receiver, sender, message⟩ triples, oldest first.
    pub recorded: Vec<Term>,
    analysis: Analysis,
}

impl PartialEq for AttackerState {
    fn eq(&self, other: &Self) -> bool {
        self.owner == other.owner
            && self.listen == other.listen
            && self.senders == other.senders
            && self.static_knowledge == other.static_knowledge
            && self.recorded == other.recorded
    }
}

impl AttackerState {
    pub fn new(owner: impl Into<Text>, listen: Vec<Term>, senders: Vec<Term>, static_knowledge: Vec<Term>) -> Self {
        let owner = owner.into();
        let analysis = Analysis::of(&static_knowledge, NoncePool::Owner(owner.clone()));
        AttackerState { owner, listen, senders, static_knowledge, recorded: Vec::new(), analysis }
    }

    /// Ordered knowledge list that recipe variables index.
    pub fn knowledge(&self) -> Vec<Term> {
        let mut k = self.static_knowledge.clone();
        k.extend(self.recorded.iter().cloned());
        k
    }

    pub fn analysis(&self) -> &Analysis {
        &self.analysis
    }

    pub fn derivable(&self, t: &Term) -> bool {
        self.analysis.derivable(t)
    }

    pub fn record(&mut self, receiver: &Term, sender: &Term, payload: &Term) {
        let triple = Term::seq(alloc::vec![receiver.clone(), sender.clone(), payload.clone()]);
        self.analysis.push(&triple);
        self.recorded.push(triple);
    }

    /// State term: static knowledge followed by records, newest first.
    pub fn to_term(&self) -> Term {
        let mut items = self.static_knowledge.clone();
        items.push(Term::seq(self.recorded.iter().rev().cloned().collect()));
        Term::seq(items)
    }

    /// Records the event, then emits an oracle-chosen number of derivable messages.
    pub fn relation(
        &mut self,
        receiver: &Term,
        sender: &Term,
        payload: &Term,
        world: &World,
        oracle: &mut Oracle<'_>,
    ) -> Result<Vec<Emission>, OracleError> {
        self.record(receiver, sender, payload);
        let counts: Vec<Term> = (0..=MAX_EMISSIONS).map(Term::nat).collect();
        let count = oracle.choose("attacker.emit.count", &counts)?;
        let knowledge = self.knowledge();
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let ctx = RecipeContext {
                knowledge: &knowledge,
                analysis: &self.analysis,
                goal: Goal::Emission { receivers: &world.addresses, senders: &self.senders },
                vocab: &world.vocab,
                max_depth: world.recipe_depth,
                fallback: Term::seq(alloc::vec![self.senders[0].clone(), self.senders[0].clone(), Term::empty()]),
            };
            let (_, v) = oracle.recipe("attacker.emit", &ctx)?;
            let [r, s, m] = v.items() else { unreachable!("goal validated the triple shape") };
            out.push(Emission { receiver: r.clone(), sender: s.clone(), payload: m.clone() });
        }
        Ok(out)
    }
}
