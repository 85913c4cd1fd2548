//! Intruder deduction: analysis by saturation, synthesis top-down, and recipes as witnesses.

pub mod attacker;

use crate::terms::{normalize, Func, Nonce, Term, Text};
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

/// Which nonces a deriving party may mint fresh.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NoncePool {
    None,
    /// Every nonce of the given owner.
    Owner(Text),
    /// Nonces of the owner except the listed indices (a cleaned pool).
    OwnerExcept(Text, BTreeSet<u64>),
    Set(BTreeSet<Nonce>),
}

impl NoncePool {
    pub fn allows(&self, n: &Nonce) -> bool {
        match self {
            NoncePool::None => false,
            NoncePool::Owner(o) => n.owner == *o,
            NoncePool::OwnerExcept(o, used) => n.owner == *o && !used.contains(&n.index),
            NoncePool::Set(s) => s.contains(n),
        }
    }
}

/// Name of the recipe variable standing for the `i`-th (0-based) knowledge item.
pub fn recipe_var(i: usize) -> Term {
    Term::var(format!("x{}", i + 1))
}

fn recipe_index(name: &str) -> Option<usize> {
    name.strip_prefix('x')?.parse::<usize>().ok()?.checked_sub(1)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecipeError {
    #[error("recipe variable ?{0} does not name a knowledge item")]
    UnknownVar(Text),
    #[error("recipe mints nonce {0:?} outside the permitted pool")]
    ForbiddenNonce(Nonce),
}

/// Instantiates a recipe over an ordered knowledge list and returns the normal form.
pub fn eval_recipe(recipe: &Term, knowledge: &[Term], pool: &NoncePool) -> Result<Term, RecipeError> {
    Ok(normalize(&substitute(recipe, knowledge, pool)?))
}

fn substitute(r: &Term, knowledge: &[Term], pool: &NoncePool) -> Result<Term, RecipeError> {
    Ok(match r {
        Term::Var(name) => match recipe_index(name).and_then(|i| knowledge.get(i)) {
            Some(t) => t.clone(),
            None => return Err(RecipeError::UnknownVar(name.clone())),
        },
        Term::Nonce(n) => {
            if !pool.allows(n) {
                return Err(RecipeError::ForbiddenNonce(n.clone()));
            }
            r.clone()
        }
        Term::Seq(items) => Term::seq(items.iter().map(|t| substitute(t, knowledge, pool)).collect::<Result<_, _>>()?),
        Term::App(f, args) => Term::app(*f, args.iter().map(|t| substitute(t, knowledge, pool)).collect::<Result<_, _>>()?),
        _ => r.clone(),
    })
}

/// Saturated analysis of an ordered knowledge list; grows incrementally.
#[derive(Clone, Debug)]
pub struct Analysis {
    pool: NoncePool,
    len: usize,
    /// Every analyzed term with a recipe deriving it.
    known: BTreeMap<Term, Term>,
    /// Ciphertexts whose key is not yet synthesizable.
    blocked: Vec<(Term, Term)>,
}

impl Analysis {
    pub fn new(pool: NoncePool) -> Self {
        Analysis { pool, len: 0, known: BTreeMap::new(), blocked: Vec::new() }
    }

    pub fn of(knowledge: &[Term], pool: NoncePool) -> Self {
        let mut a = Analysis::new(pool);
        a.extend(knowledge);
        a
    }

    pub fn pool(&self) -> &NoncePool {
        &self.pool
    }

    /// Number of knowledge items absorbed so far.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Absorbs new knowledge items; they are numbered after the ones already present.
    pub fn extend<'a>(&mut self, items: impl IntoIterator<Item = &'a Term>) {
        let mut work = Vec::new();
        for t in items {
            work.push((normalize(t), recipe_var(self.len)));
            self.len += 1;
        }
        self.saturate(work);
    }

    pub fn push(&mut self, item: &Term) {
        self.extend(core::iter::once(item));
    }

    fn saturate(&mut self, mut work: Vec<(Term, Term)>) {
        loop {
            let mut grew = false;
            while let Some((t, r)) = work.pop() {
                if self.known.contains_key(&t) {
                    continue;
                }
                self.known.insert(t.clone(), r.clone());
                grew = true;
                self.decompose(&t, &r, &mut work);
            }
            if !grew || self.blocked.is_empty() {
                return;
            }
            // New knowledge may unlock a blocked ciphertext.
            let pending = core::mem::take(&mut self.blocked);
            for (c, r) in pending {
                self.decompose(&c, &r, &mut work);
            }
            if work.is_empty() {
                return;
            }
        }
    }

    fn decompose(&mut self, t: &Term, r: &Term, work: &mut Vec<(Term, Term)>) {
        match t {
            Term::Seq(items) => {
                for (i, it) in items.iter().enumerate() {
                    work.push((it.clone(), Term::app(Func::Proj(i as u32 + 1), alloc::vec![r.clone()])));
                }
            }
            Term::App(Func::Sig, args) => {
                work.push((args[0].clone(), Term::app(Func::ExtractMsg, alloc::vec![r.clone()])));
            }
            Term::App(Func::EncA, args) => {
                if let Term::App(Func::Pub, k) = &args[1] {
                    match self.synthesize(&k[0]) {
                        Some(kr) => work.push((args[0].clone(), Term::app(Func::DecA, alloc::vec![r.clone(), kr]))),
                        None => self.blocked.push((t.clone(), r.clone())),
                    }
                }
            }
            Term::App(Func::EncS, args) => match self.synthesize(&args[1]) {
                Some(kr) => work.push((args[0].clone(), Term::app(Func::DecS, alloc::vec![r.clone(), kr]))),
                None => self.blocked.push((t.clone(), r.clone())),
            },
            _ => {}
        }
    }

    /// True iff `t` (already normal) occurs in the analyzed set.
    pub fn contains(&self, t: &Term) -> bool {
        self.known.contains_key(t)
    }

    /// Every analyzed term, in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.known.keys()
    }

    /// A recipe for a normal-form target, built top-down over the analyzed set.
    pub fn synthesize(&self, target: &Term) -> Option<Term> {
        if let Some(r) = self.known.get(target) {
            return Some(r.clone());
        }
        match target {
            Term::Top | Term::Bot | Term::Undef | Term::Str(_) | Term::Addr(_) => Some(target.clone()),
            Term::Nonce(n) if self.pool.allows(n) => Some(target.clone()),
            Term::Seq(items) => Some(Term::seq(items.iter().map(|t| self.synthesize(t)).collect::<Option<_>>()?)),
            Term::App(f, args) => Some(Term::app(*f, args.iter().map(|t| self.synthesize(t)).collect::<Option<_>>()?)),
            _ => None,
        }
    }

    pub fn derivable(&self, target: &Term) -> bool {
        self.synthesize(&normalize(target)).is_some()
    }
}

/// `target ∈ d_N(knowledge)` for the given nonce pool.
pub fn derivable(target: &Term, knowledge: &[Term], pool: NoncePool) -> bool {
    Analysis::of(knowledge, pool).derivable(target)
}
