//! Pointers, dictionaries and sequence helpers over normal-form terms.

use super::{Term, Text};
use alloc::vec::Vec;

/// Left-to-right projection along 1-based positions; ◊ once a step leaves a sequence.
pub fn deref(t: &Term, path: &[usize]) -> Term {
    let mut cur = t;
    for &i in path {
        match cur.at(i) {
            Some(next) => cur = next,
            None => return Term::Undef,
        }
    }
    cur.clone()
}

fn key_pos(d: &Term, k: &Term) -> Option<usize> {
    d.items().iter().position(|kv| kv.at(1) == Some(k))
}

/// `d[k]`, or ⟨⟩ when the key is absent or `d` is not a dictionary.
pub fn dict_get(d: &Term, k: &Term) -> Term {
    key_pos(d, k)
        .and_then(|i| d.items()[i].at(2).cloned())
        .unwrap_or_else(Term::empty)
}

/// Replaces the value under `k` in place, or appends a new pair.
pub fn dict_put(d: &Term, k: Term, v: Term) -> Term {
    let mut items = d.items().to_vec();
    match key_pos(d, &k) {
        Some(i) => items[i] = Term::pair(k, v),
        None => items.push(Term::pair(k, v)),
    }
    Term::seq(items)
}

pub fn dict_remove(d: &Term, k: &Term) -> Term {
    Term::seq(d.items().iter().filter(|kv| kv.at(1) != Some(k)).cloned().collect())
}

pub fn dict_keys(d: &Term) -> Vec<Term> {
    d.items().iter().filter_map(|kv| kv.at(1).cloned()).collect()
}

/// `s +⟨⟩ x`; a non-sequence is treated as ⟨⟩.
pub fn seq_append(s: &Term, x: Term) -> Term {
    let mut items = s.items().to_vec();
    items.push(x);
    Term::seq(items)
}

pub fn elem_of(x: &Term, s: &Term) -> bool {
    s.items().contains(x)
}

/// Variable assignment produced by a successful match.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Binding(Vec<(Text, Term)>);

impl Binding {
    pub fn get(&self, name: &str) -> Option<&Term> {
        self.0.iter().find(|(n, _)| n.as_str() == name).map(|(_, t)| t)
    }

    /// Bound value; panics on a name absent from the pattern, which is a programming error.
    pub fn take(&self, name: &str) -> Term {
        match self.get(name) {
            Some(t) => t.clone(),
            None => panic!("pattern has no variable ?{name}"),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Term)> {
        self.0.iter().map(|(n, t)| (n.as_str(), t))
    }
}

/// Matches a normal-form ground term against a linear pattern; arities must agree exactly.
pub fn match_pattern(t: &Term, pattern: &Term) -> Option<Binding> {
    let mut b = Binding::default();
    if walk(t, pattern, &mut b) {
        Some(b)
    } else {
        None
    }
}

fn walk(t: &Term, p: &Term, b: &mut Binding) -> bool {
    match (t, p) {
        (_, Term::Var(name)) => {
            debug_assert!(b.get(name).is_none(), "pattern variable ?{name} is not linear");
            b.0.push((name.clone(), t.clone()));
            true
        }
        (Term::Seq(ts), Term::Seq(ps)) => ts.len() == ps.len() && ts.iter().zip(ps.iter()).all(|(x, y)| walk(x, y, b)),
        (Term::App(f, ts), Term::App(g, ps)) => f == g && ts.iter().zip(ps.iter()).all(|(x, y)| walk(x, y, b)),
        _ => t == p,
    }
}
