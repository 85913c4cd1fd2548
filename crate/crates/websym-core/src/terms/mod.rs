//! Term algebra: constants, nonces, sequences and the signature's function symbols.

mod dict;
mod syntax;

pub use dict::{deref, dict_get, dict_keys, dict_put, dict_remove, elem_of, match_pattern, seq_append, Binding};
pub use syntax::{parse, ParseError};

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::hash::{Hash, Hasher};
use core::ops::Deref;

/// Shared string payload; static tokens avoid allocation.
#[derive(Clone)]
pub struct Text(TextRepr);

#[derive(Clone)]
enum TextRepr {
    Static(&'static str),
    Shared(Arc<str>),
}

impl Text {
    pub const fn from_static(s: &'static str) -> Self {
        Text(TextRepr::Static(s))
    }

    pub fn as_str(&self) -> &str {
        match &self.0 {
            TextRepr::Static(s) => s,
            TextRepr::Shared(s) => s,
        }
    }
}

impl Deref for Text {
    type Target = str;
    fn deref(&self) -> &str {
        self.as_str()
    }
}

impl From<&str> for Text {
    fn from(s: &str) -> Self {
        Text(TextRepr::Shared(Arc::from(s)))
    }
}

impl From<alloc::string::String> for Text {
    fn from(s: alloc::string::String) -> Self {
        Text(TextRepr::Shared(Arc::from(s)))
    }
}

impl PartialEq for Text {
    fn eq(&self, other: &Self) -> bool {
        self.as_str() == other.as_str()
    }
}
impl Eq for Text {}

impl PartialOrd for Text {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Text {
    fn cmp(&self, other: &Self) -> Ordering {
        self.as_str().cmp(other.as_str())
    }
}
impl Hash for Text {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.as_str().hash(state)
    }
}
impl fmt::Debug for Text {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self.as_str(), f)
    }
}
impl fmt::Display for Text {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A nonce from the pool of one owner; disjoint pools by construction.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Nonce {
    pub owner: Text,
    pub index: u64,
}

impl Nonce {
    pub fn new(owner: impl Into<Text>, index: u64) -> Self {
        Nonce { owner: owner.into(), index }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Func {
    Pub,
    EncA,
    DecA,
    EncS,
    DecS,
    Sig,
    CheckSig,
    ExtractMsg,
    /// Projection onto the given 1-based position.
    Proj(u32),
}

impl Func {
    pub fn arity(self) -> usize {
        match self {
            Func::Pub | Func::ExtractMsg | Func::Proj(_) => 1,
            _ => 2,
        }
    }

    /// True for symbols that never occur at the head of a redex.
    pub fn is_constructor(self) -> bool {
        matches!(self, Func::Pub | Func::EncA | Func::EncS | Func::Sig)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Top,
    Bot,
    Undef,
    Str(Text),
    Addr(Text),
    Nonce(Nonce),
    /// Pattern and recipe variable; never part of a runtime message.
    Var(Text),
    Seq(Arc<[Term]>),
    App(Func, Arc<[Term]>),
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        syntax::write_term(f, self)
    }
}

impl Term {
    pub const fn lit(s: &'static str) -> Term {
        Term::Str(Text::from_static(s))
    }

    pub fn str(s: impl Into<Text>) -> Term {
        Term::Str(s.into())
    }

    pub fn addr(s: impl Into<Text>) -> Term {
        Term::Addr(s.into())
    }

    pub fn nonce(owner: impl Into<Text>, index: u64) -> Term {
        Term::Nonce(Nonce::new(owner, index))
    }

    pub fn var(name: impl Into<Text>) -> Term {
        Term::Var(name.into())
    }

    pub fn seq(items: Vec<Term>) -> Term {
        Term::Seq(Arc::from(items))
    }

    pub fn empty() -> Term {
        Term::Seq(Arc::from(Vec::new()))
    }

    pub fn pair(a: Term, b: Term) -> Term {
        Term::seq(alloc::vec![a, b])
    }

    pub fn truth(b: bool) -> Term {
        if b {
            Term::Top
        } else {
            Term::Bot
        }
    }

    /// Natural numbers are carried as decimal string constants.
    pub fn nat(n: usize) -> Term {
        Term::str(alloc::format!("{n}"))
    }

    pub fn as_nat(&self) -> Option<usize> {
        match self {
            Term::Str(s) if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) => s.parse().ok(),
            _ => None,
        }
    }

    pub fn app(f: Func, args: Vec<Term>) -> Term {
        debug_assert_eq!(f.arity(), args.len());
        Term::App(f, Arc::from(args))
    }

    pub fn pub_key(k: Term) -> Term {
        Term::app(Func::Pub, alloc::vec![k])
    }

    pub fn enc_a(m: Term, k: Term) -> Term {
        Term::app(Func::EncA, alloc::vec![m, k])
    }

    pub fn enc_s(m: Term, k: Term) -> Term {
        Term::app(Func::EncS, alloc::vec![m, k])
    }

    pub fn sig(m: Term, k: Term) -> Term {
        Term::app(Func::Sig, alloc::vec![m, k])
    }

    /// Normalized dec_a of normal-form arguments.
    pub fn dec_a(c: &Term, k: &Term) -> Term {
        reduce(Func::DecA, alloc::vec![c.clone(), k.clone()])
    }

    pub fn dec_s(c: &Term, k: &Term) -> Term {
        reduce(Func::DecS, alloc::vec![c.clone(), k.clone()])
    }

    pub fn extractmsg(s: &Term) -> Term {
        reduce(Func::ExtractMsg, alloc::vec![s.clone()])
    }

    pub fn checksig(s: &Term, k: &Term) -> Term {
        reduce(Func::CheckSig, alloc::vec![s.clone(), k.clone()])
    }

    /// Normalized projection `π_i` (1-based) of a normal-form term.
    pub fn proj(&self, i: usize) -> Term {
        match self {
            Term::Seq(items) if i >= 1 && i <= items.len() => items[i - 1].clone(),
            _ => Term::Undef,
        }
    }

    /// Borrowing projection; `None` where the normalized projection is ◊.
    pub fn at(&self, i: usize) -> Option<&Term> {
        match self {
            Term::Seq(items) if i >= 1 => items.get(i - 1),
            _ => None,
        }
    }

    pub fn as_seq(&self) -> Option<&[Term]> {
        match self {
            Term::Seq(items) => Some(items),
            _ => None,
        }
    }

    /// Sequence items, or the empty slice for non-sequences.
    pub fn items(&self) -> &[Term] {
        self.as_seq().unwrap_or(&[])
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Term::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_nonce(&self) -> Option<&Nonce> {
        match self {
            Term::Nonce(n) => Some(n),
            _ => None,
        }
    }

    pub fn is_str(&self, s: &str) -> bool {
        matches!(self, Term::Str(t) if t.as_str() == s)
    }

    /// Length of a sequence, `None` (◊) otherwise.
    pub fn seq_len(&self) -> Option<usize> {
        self.as_seq().map(|s| s.len())
    }

    pub fn is_empty_seq(&self) -> bool {
        matches!(self, Term::Seq(items) if items.is_empty())
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Seq(items) | Term::App(_, items) => items.iter().all(Term::is_ground),
            _ => true,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Seq(items) | Term::App(_, items) => 1 + items.iter().map(Term::depth).max().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Seq(items) | Term::App(_, items) => 1 + items.iter().map(Term::size).sum::<usize>(),
            _ => 1,
        }
    }

    /// Visits every subterm, parents before children.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        f(self);
        if let Term::Seq(items) | Term::App(_, items) = self {
            for t in items.iter() {
                t.visit(f);
            }
        }
    }

    pub fn nonces(&self) -> Vec<Nonce> {
        let mut out = Vec::new();
        self.visit(&mut |t| {
            if let Term::Nonce(n) = t {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
        });
        out
    }

    /// Replaces the `i`-th item (1-based) of a sequence; other terms are returned unchanged.
    pub fn with_item(&self, i: usize, value: Term) -> Term {
        match self {
            Term::Seq(items) if i >= 1 && i <= items.len() => {
                let mut v = items.to_vec();
                v[i - 1] = value;
                Term::seq(v)
            }
            _ => self.clone(),
        }
    }

    /// The canonical serialization.
    pub fn render(&self) -> alloc::string::String {
        alloc::format!("{self}")
    }
}

/// True iff no subterm is a redex.
pub fn is_normal(t: &Term) -> bool {
    match t {
        Term::Seq(items) => items.iter().all(is_normal),
        Term::App(f, args) => args.iter().all(is_normal) && !is_redex(*f, args),
        _ => true,
    }
}

fn is_redex(f: Func, args: &[Term]) -> bool {
    match f {
        Func::DecA => matches!(&args[0], Term::App(Func::EncA, inner)
            if matches!(&inner[1], Term::App(Func::Pub, k) if k[0] == args[1])),
        Func::DecS => matches!(&args[0], Term::App(Func::EncS, inner) if inner[1] == args[1]),
        Func::ExtractMsg => matches!(&args[0], Term::App(Func::Sig, _)),
        Func::CheckSig => matches!((&args[0], &args[1]), (Term::App(Func::Sig, s), Term::App(Func::Pub, k)) if s[1] == k[0]),
        Func::Proj(_) => !matches!(&args[0], Term::Var(_)),
        _ => false,
    }
}

/// Rewrites one application whose arguments are already normal.
fn reduce(f: Func, args: Vec<Term>) -> Term {
    match f {
        Func::DecA => {
            if let Term::App(Func::EncA, inner) = &args[0] {
                if let Term::App(Func::Pub, k) = &inner[1] {
                    if k[0] == args[1] {
                        return inner[0].clone();
                    }
                }
            }
        }
        Func::DecS => {
            if let Term::App(Func::EncS, inner) = &args[0] {
                if inner[1] == args[1] {
                    return inner[0].clone();
                }
            }
        }
        Func::ExtractMsg => {
            if let Term::App(Func::Sig, inner) = &args[0] {
                return inner[0].clone();
            }
        }
        Func::CheckSig => {
            if let (Term::App(Func::Sig, s), Term::App(Func::Pub, k)) = (&args[0], &args[1]) {
                if s[1] == k[0] {
                    return Term::Top;
                }
            }
        }
        Func::Proj(i) => match &args[0] {
            Term::Var(_) => {}
            other => return other.proj(i as usize),
        },
        _ => {}
    }
    Term::App(f, Arc::from(args))
}

/// Innermost normal form; `None` if `t` is already normal.
fn normalize_changed(t: &Term) -> Option<Term> {
    match t {
        Term::Seq(items) => rebuild(items).map(Term::seq),
        Term::App(f, args) => match rebuild(args) {
            Some(new_args) => Some(reduce(*f, new_args)),
            None if is_redex(*f, args) => Some(reduce(*f, args.to_vec())),
            None => None,
        },
        _ => None,
    }
}

fn rebuild(items: &[Term]) -> Option<Vec<Term>> {
    let mut out: Option<Vec<Term>> = None;
    for (i, t) in items.iter().enumerate() {
        if let Some(n) = normalize_changed(t) {
            let v = out.get_or_insert_with(|| items[..i].to_vec());
            v.push(n);
        } else if let Some(v) = out.as_mut() {
            v.push(t.clone());
        }
    }
    out
}

pub fn normalize(t: &Term) -> Term {
    normalize_changed(t).unwrap_or_else(|| t.clone())
}

pub fn equiv(a: &Term, b: &Term) -> bool {
    normalize(a) == normalize(b)
}

/// Well-known string constants of the web model.
pub mod tok {
    use super::Term;

    pub const HTTP_REQ: Term = Term::lit("HTTPReq");
    pub const HTTP_RESP: Term = Term::lit("HTTPResp");
    pub const DNS_RESOLVE: Term = Term::lit("DNSResolve");
    pub const DNS_RESOLVED: Term = Term::lit("DNSResolved");
    pub const URL: Term = Term::lit("URL");
    pub const P: Term = Term::lit("P");
    pub const S: Term = Term::lit("S");
    pub const GET: Term = Term::lit("GET");
    pub const POST: Term = Term::lit("POST");
    pub const HEAD: Term = Term::lit("HEAD");
    pub const CONNECT: Term = Term::lit("CONNECT");
    pub const TRACE: Term = Term::lit("TRACE");
    pub const TRACK: Term = Term::lit("TRACK");
    pub const ORIGIN: Term = Term::lit("Origin");
    pub const COOKIE: Term = Term::lit("Cookie");
    pub const SET_COOKIE: Term = Term::lit("Set-Cookie");
    pub const LOCATION: Term = Term::lit("Location");
    pub const STS: Term = Term::lit("Strict-Transport-Security");
    pub const TRIGGER: Term = Term::lit("TRIGGER");
    pub const FULLCORRUPT: Term = Term::lit("FULLCORRUPT");
    pub const CLOSECORRUPT: Term = Term::lit("CLOSECORRUPT");
    pub const BLANK: Term = Term::lit("_BLANK");
    pub const HREF: Term = Term::lit("HREF");
    pub const IFRAME: Term = Term::lit("IFRAME");
    pub const FORM: Term = Term::lit("FORM");
    pub const SETSCRIPT: Term = Term::lit("SETSCRIPT");
    pub const SETSCRIPTSTATE: Term = Term::lit("SETSCRIPTSTATE");
    pub const XHR: Term = Term::lit("XMLHTTPREQUEST");
    pub const BACK: Term = Term::lit("BACK");
    pub const FORWARD: Term = Term::lit("FORWARD");
    pub const CLOSE: Term = Term::lit("CLOSE");
    pub const POSTMESSAGE: Term = Term::lit("POSTMESSAGE");
    pub const STATUS_200: Term = Term::lit("200");
    pub const STATUS_303: Term = Term::lit("303");
    pub const STATUS_307: Term = Term::lit("307");
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn k() -> Term {
        Term::nonce("k", 1)
    }

    #[test]
    fn worked_example_projects_first_component() {
        let pair = Term::pair(Term::lit("a"), Term::lit("b"));
        let t = Term::app(
            Func::Proj(1),
            vec![Term::app(Func::DecA, vec![Term::enc_a(pair, Term::pub_key(k())), k()])],
        );
        assert_eq!(normalize(&t), Term::lit("a"));
    }

    #[test]
    fn checksig_reduces_to_top() {
        let m = Term::lit("m");
        let t = Term::app(Func::CheckSig, vec![Term::sig(m, k()), Term::pub_key(k())]);
        assert_eq!(normalize(&t), Term::Top);
    }

    #[test]
    fn projection_out_of_range_or_on_atoms_is_undefined() {
        let ab = Term::pair(Term::lit("a"), Term::lit("b"));
        assert_eq!(normalize(&Term::app(Func::Proj(3), vec![ab])), Term::Undef);
        assert_eq!(normalize(&Term::app(Func::Proj(1), vec![Term::lit("a")])), Term::Undef);
    }

    #[test]
    fn symmetric_roundtrip_and_distinct_keys() {
        let m = Term::lit("m");
        let c = Term::app(Func::DecS, vec![Term::enc_s(m.clone(), k()), k()]);
        assert!(equiv(&c, &m));
        assert!(equiv(&m, &m));
        let other = Term::nonce("k", 2);
        assert!(!equiv(
            &Term::enc_a(m.clone(), Term::pub_key(k())),
            &Term::enc_a(m, Term::pub_key(other))
        ));
    }

    #[test]
    fn wrong_key_leaves_destructor_in_place() {
        let m = Term::lit("m");
        let c = Term::app(Func::DecA, vec![Term::enc_a(m, Term::pub_key(k())), Term::nonce("k", 9)]);
        let n = normalize(&c);
        assert!(matches!(n, Term::App(Func::DecA, _)));
        assert!(is_normal(&n));
    }

    #[test]
    fn normalize_leaves_normal_terms_shared() {
        let t = Term::seq(vec![Term::lit("x"), Term::enc_s(Term::lit("y"), k())]);
        let n = normalize(&t);
        match (&t, &n) {
            (Term::Seq(a), Term::Seq(b)) => assert!(Arc::ptr_eq(a, b)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn nat_roundtrip() {
        assert_eq!(Term::nat(12).as_nat(), Some(12));
        assert_eq!(Term::lit("x").as_nat(), None);
    }
}
