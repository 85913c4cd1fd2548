//! Independent oracles and term generators shared by integration tests.
//!
//! Nothing here calls the engine's rewriting or analysis; the oracles are deliberately naive.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use websym_core::derive::NoncePool;
use websym_core::terms::{Func, Term};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn app(f: Func, args: Vec<Term>) -> Term {
    Term::app(f, args)
}

/// One rewrite step at the root, if a rule applies there.
fn root_step(t: &Term) -> Option<Term> {
    let Term::App(f, args) = t else { return None };
    match (f, &args[..]) {
        (Func::DecA, [Term::App(Func::EncA, e), k]) => match &e[..] {
            [m, Term::App(Func::Pub, p)] if p[0] == *k => Some(m.clone()),
            _ => None,
        },
        (Func::DecS, [Term::App(Func::EncS, e), k]) if e[1] == *k => Some(e[0].clone()),
        (Func::ExtractMsg, [Term::App(Func::Sig, s)]) => Some(s[0].clone()),
        (Func::CheckSig, [Term::App(Func::Sig, s), Term::App(Func::Pub, p)]) if s[1] == p[0] => Some(Term::Top),
        (Func::Proj(i), [Term::Seq(items)]) => {
            let i = *i as usize;
            Some(if (1..=items.len()).contains(&i) { items[i - 1].clone() } else { Term::Undef })
        }
        // Projecting anything else is undefined once the argument can no longer change shape.
        (Func::Proj(_), [x]) if !matches!(x, Term::Var(_)) && rewrite_once(x).is_none() => Some(Term::Undef),
        _ => None,
    }
}

/// Leftmost-outermost single step.
fn rewrite_once(t: &Term) -> Option<Term> {
    if let Some(r) = root_step(t) {
        return Some(r);
    }
    let rebuild = |items: &[Term]| -> Option<Vec<Term>> {
        items.iter().enumerate().find_map(|(i, x)| {
            rewrite_once(x).map(|n| {
                let mut v = items.to_vec();
                v[i] = n;
                v
            })
        })
    };
    match t {
        Term::Seq(items) => rebuild(items).map(Term::seq),
        Term::App(f, args) => rebuild(args).map(|a| app(*f, a)),
        _ => None,
    }
}

/// Normal form by exhaustive outermost rewriting; a different strategy from the engine's.
pub fn naive_normalize(t: &Term) -> Term {
    let mut t = t.clone();
    while let Some(n) = rewrite_once(&t) {
        t = n;
    }
    t
}

const KEYS: [(&str, u64); 3] = [("k", 1), ("k", 2), ("k", 3)];
const LITS: [&str; 3] = ["a", "b", "c"];

fn key(r: &mut ChaCha8Rng) -> Term {
    let (o, i) = KEYS[r.random_range(0..KEYS.len())];
    Term::nonce(o, i)
}

fn atom(r: &mut ChaCha8Rng) -> Term {
    match r.random_range(0..8) {
        0..=2 => Term::lit(LITS[r.random_range(0..LITS.len())]),
        3..=4 => key(r),
        5 => Term::nonce("n", r.random_range(0..3)),
        6 => Term::Top,
        _ => Term::Bot,
    }
}

/// Arbitrary term with redexes likely: keys come from a small shared pool.
pub fn random_term(r: &mut ChaCha8Rng, depth: usize) -> Term {
    if depth == 0 || r.random_bool(0.2) {
        return atom(r);
    }
    let d = depth - 1;
    match r.random_range(0..11) {
        0 => Term::seq((0..r.random_range(0..4)).map(|_| random_term(r, d)).collect()),
        1 => Term::pub_key(key(r)),
        2 => Term::enc_a(random_term(r, d), if r.random_bool(0.8) { Term::pub_key(key(r)) } else { random_term(r, d) }),
        3 => Term::enc_s(random_term(r, d), key(r)),
        4 => Term::sig(random_term(r, d), key(r)),
        5 => app(Func::DecA, vec![random_term(r, d), key(r)]),
        6 => app(Func::DecS, vec![random_term(r, d), key(r)]),
        7 => app(Func::ExtractMsg, vec![random_term(r, d)]),
        8 => app(Func::CheckSig, vec![random_term(r, d), Term::pub_key(key(r))]),
        _ => app(Func::Proj(r.random_range(1..4)), vec![random_term(r, d)]),
    }
}

/// Five atoms for knowledge sets: four nonces and one public string.
pub fn atoms() -> [Term; 5] {
    [Term::nonce("k", 1), Term::nonce("k", 2), Term::nonce("s", 1), Term::nonce("s", 2), Term::lit("a")]
}

/// Constructor-only message over `atoms()` of depth at most `depth`.
pub fn random_message(r: &mut ChaCha8Rng, depth: usize) -> Term {
    let atoms = atoms();
    if depth == 0 || r.random_bool(0.25) {
        return atoms[r.random_range(0..atoms.len())].clone();
    }
    let d = depth - 1;
    let pick = |r: &mut ChaCha8Rng| atoms[r.random_range(0..atoms.len())].clone();
    match r.random_range(0..5) {
        0 => Term::seq((0..r.random_range(1..3)).map(|_| random_message(r, d)).collect()),
        1 => Term::pub_key(pick(r)),
        2 => Term::enc_a(random_message(r, d), Term::pub_key(pick(r))),
        3 => Term::enc_s(random_message(r, d), if r.random_bool(0.8) { pick(r) } else { random_message(r, d) }),
        _ => Term::sig(random_message(r, d), pick(r)),
    }
}

fn subterms(t: &Term, out: &mut BTreeSet<Term>) {
    if !out.insert(t.clone()) {
        return;
    }
    match t {
        Term::Seq(items) | Term::App(_, items) => items.iter().for_each(|x| subterms(x, out)),
        _ => {}
    }
}

/// Derivability by saturating the knowledge over the subterm universe of knowledge and target.
///
/// Decomposition: projections, symmetric and asymmetric decryption with a derived key,
/// message extraction from signatures. Composition: sequences and the four constructors,
/// restricted to terms of the universe. Public constants are free; nonces only via `pool`.
pub fn closure_derivable(knowledge: &[Term], pool: &NoncePool, target: &Term) -> bool {
    let mut universe = BTreeSet::new();
    knowledge.iter().for_each(|k| subterms(k, &mut universe));
    subterms(target, &mut universe);
    let mut known: BTreeSet<Term> = knowledge.iter().cloned().collect();
    loop {
        let mut new = Vec::new();
        for t in &universe {
            if known.contains(t) {
                continue;
            }
            let ok = match t {
                Term::Top | Term::Bot | Term::Undef | Term::Str(_) | Term::Addr(_) => true,
                Term::Nonce(n) => pool.allows(n),
                Term::Seq(items) => items.iter().all(|x| known.contains(x)),
                Term::App(f, args) if f.is_constructor() => args.iter().all(|x| known.contains(x)),
                _ => false,
            };
            if ok {
                new.push(t.clone());
            }
        }
        for t in &known {
            match t {
                Term::Seq(items) => new.extend(items.iter().cloned()),
                Term::App(Func::Sig, a) => new.push(a[0].clone()),
                Term::App(Func::EncS, a) if known.contains(&a[1]) => new.push(a[0].clone()),
                Term::App(Func::EncA, a) => {
                    if let Term::App(Func::Pub, k) = &a[1] {
                        if known.contains(&k[0]) {
                            new.push(a[0].clone());
                        }
                    }
                }
                _ => {}
            }
        }
        let before = known.len();
        known.extend(new);
        if known.len() == before {
            return known.contains(target);
        }
    }
}
