//! Script interface, the registry of script names, the attacker script and shared helpers.

pub mod tree;

use crate::browserid;
use crate::derive::{Analysis, NoncePool};
use crate::oracle::{Goal, Oracle, OracleError, RecipeContext};
use crate::runtime::World;
use crate::terms::{Nonce, Term, Text};
use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

pub const ATT_SCRIPT: Term = Term::lit("att_script");
pub const RP_INDEX: Term = Term::lit("script_RP_index");
pub const LPO_CIF: Term = Term::lit("script_LPO_cif");
pub const LPO_LD: Term = Term::lit("script_LPO_ld");

/// Registered scripts; names map injectively to relations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScriptKind {
    Attacker,
    RpIndex,
    LpoCif,
    LpoLd,
}

impl ScriptKind {
    pub const ALL: [ScriptKind; 4] = [ScriptKind::Attacker, ScriptKind::RpIndex, ScriptKind::LpoCif, ScriptKind::LpoLd];

    pub fn name(self) -> Term {
        match self {
            ScriptKind::Attacker => ATT_SCRIPT,
            ScriptKind::RpIndex => RP_INDEX,
            ScriptKind::LpoCif => LPO_CIF,
            ScriptKind::LpoLd => LPO_LD,
        }
    }

    pub fn from_name(t: &Term) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == *t)
    }
}

/// Fresh nonces granted to one script run; the browser marks drawn ones as used afterwards.
#[derive(Clone, Debug)]
pub struct NonceSource {
    owner: Text,
    next: u64,
    used: BTreeSet<u64>,
    drawn: Vec<Term>,
    /// Grants every unused nonce (attacker script) instead of only those drawn.
    open: bool,
}

impl NonceSource {
    pub fn new(owner: Text, next: u64, used: BTreeSet<u64>) -> Self {
        NonceSource { owner, next, used, drawn: Vec::new(), open: false }
    }

    pub fn fresh(&mut self) -> Term {
        while self.used.contains(&self.next) {
            self.next += 1;
        }
        let n = Term::nonce(self.owner.clone(), self.next);
        self.next += 1;
        self.drawn.push(n.clone());
        n
    }

    pub fn drawn(&self) -> &[Term] {
        &self.drawn
    }

    pub fn next(&self) -> u64 {
        self.next
    }

    /// Nonces the output may contain beyond those derivable from the input.
    pub fn pool(&self) -> NoncePool {
        if self.open {
            NoncePool::OwnerExcept(self.owner.clone(), self.used.clone())
        } else {
            NoncePool::Set(self.drawn.iter().filter_map(|n| n.as_nonce().cloned()).collect::<BTreeSet<Nonce>>())
        }
    }
}

/// Named components of a script input.
pub struct ScriptInput<'a> {
    pub tree: &'a Term,
    pub docnonce: &'a Term,
    pub state: &'a Term,
    pub inputs: &'a Term,
    pub cookies: &'a Term,
    pub local_storage: &'a Term,
    pub session_storage: &'a Term,
    pub secret: &'a Term,
}

impl<'a> ScriptInput<'a> {
    pub fn parse(t: &'a Term) -> Option<Self> {
        let [tree, docnonce, state, inputs, cookies, local_storage, session_storage, secret] = t.as_seq()? else { return None };
        Some(ScriptInput { tree, docnonce, state, inputs, cookies, local_storage, session_storage, secret })
    }

    /// Output keeping cookies and storages as given.
    pub fn emit(&self, state: Term, command: Term) -> Term {
        self.emit_with(state, self.local_storage.clone(), command)
    }

    pub fn emit_with(&self, state: Term, local_storage: Term, command: Term) -> Term {
        Term::seq(vec![state, self.cookies.clone(), local_storage, self.session_storage.clone(), command])
    }

    /// The closing fall-through: original scriptstate, no command.
    pub fn unchanged(&self) -> Term {
        self.emit(self.state.clone(), Term::empty())
    }
}

/// Applies the script registered under `name`; `None` for unregistered names.
pub fn run_script(name: &Term, input: &Term, nonces: &mut NonceSource, oracle: &mut Oracle<'_>, world: &World) -> Result<Option<Term>, OracleError> {
    let Some(kind) = ScriptKind::from_name(name) else { return Ok(None) };
    let Some(io) = ScriptInput::parse(input) else { return Ok(None) };
    let out = match kind {
        ScriptKind::Attacker => attacker_script(input, nonces, oracle, world)?,
        ScriptKind::RpIndex => browserid::rp_index::run(&io, nonces, oracle, world)?,
        ScriptKind::LpoCif => browserid::cif::run(&io, nonces, oracle, world)?,
        ScriptKind::LpoLd => browserid::ld::run(&io, nonces, oracle, world)?,
    };
    Ok(Some(out))
}

/// Outputs any oracle-chosen term derivable from the input and unused nonces.
pub fn attacker_script(input: &Term, nonces: &mut NonceSource, oracle: &mut Oracle<'_>, world: &World) -> Result<Term, OracleError> {
    nonces.open = true;
    let knowledge = vec![input.clone()];
    let analysis = Analysis::of(&knowledge, nonces.pool());
    let x1 = crate::derive::recipe_var(0);
    let field = |i: u32| Term::app(crate::terms::Func::Proj(i), vec![x1.clone()]);
    let ctx = RecipeContext {
        knowledge: &knowledge,
        analysis: &analysis,
        goal: Goal::ScriptOutput,
        vocab: &world.vocab,
        max_depth: world.recipe_depth,
        fallback: Term::seq(vec![field(3), field(5), field(6), field(7), Term::empty()]),
    };
    let (_, out) = oracle.recipe("script.attacker", &ctx)?;
    Ok(out)
}

/// Picks an unhandled input and records its 1-based index in the handled list at `handled_at`.
pub fn choose_input(state: &Term, handled_at: usize, inputs: &Term, oracle: &mut Oracle<'_>) -> Result<(Term, Term), OracleError> {
    let handled = state.proj(handled_at);
    let handled = handled.items();
    let open: Vec<usize> = (1..=inputs.items().len()).filter(|i| !handled.contains(&Term::nat(*i))).collect();
    if open.is_empty() {
        return Ok((Term::Bot, state.clone()));
    }
    let candidates: Vec<Term> = open.iter().map(|&i| inputs.proj(i)).collect();
    let pick = oracle.choose("script.chooseinput", &candidates)?;
    let mut marks = handled.to_vec();
    marks.push(Term::nat(open[pick]));
    Ok((candidates[pick].clone(), state.with_item(handled_at, Term::seq(marks))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{Choice, GuidedDecider};

    #[test]
    fn choose_input_marks_and_exhausts() {
        let state = Term::seq(vec![Term::lit("q"), Term::empty()]);
        let inputs = Term::seq(vec![Term::lit("m1")]);
        let mut g = GuidedDecider::new(vec![]);
        let mut o = Oracle::new(&mut g);
        let (input, s2) = choose_input(&state, 2, &inputs, &mut o).unwrap();
        assert_eq!(input, Term::lit("m1"));
        assert_eq!(s2.proj(2), Term::seq(vec![Term::nat(1)]));
        let (none, s3) = choose_input(&s2, 2, &inputs, &mut o).unwrap();
        assert_eq!(none, Term::Bot);
        assert_eq!(s3, s2);
    }

    #[test]
    fn two_unhandled_inputs_defer_to_the_oracle() {
        let state = Term::seq(vec![Term::lit("q"), Term::empty()]);
        let inputs = Term::seq(vec![Term::lit("m1"), Term::lit("m2")]);
        let mut g = GuidedDecider::new(vec![Choice::pick("script.chooseinput", 1)]);
        let mut o = Oracle::new(&mut g);
        let (input, s2) = choose_input(&state, 2, &inputs, &mut o).unwrap();
        assert_eq!(input, Term::lit("m2"));
        assert_eq!(s2.proj(2), Term::seq(vec![Term::nat(2)]));
    }

    #[test]
    fn registry_is_injective() {
        for k in ScriptKind::ALL {
            assert_eq!(ScriptKind::from_name(&k.name()), Some(k));
        }
        assert_eq!(ScriptKind::from_name(&Term::lit("unknown")), None);
    }

    #[test]
    fn nonce_source_skips_used_indices() {
        let mut s = NonceSource::new(Text::from("b"), 2, [2, 3].into_iter().collect());
        assert_eq!(s.fresh(), Term::nonce("b", 4));
        assert!(s.pool().allows(&Nonce::new("b", 4)));
        assert!(!s.pool().allows(&Nonce::new("b", 5)));
    }
}
