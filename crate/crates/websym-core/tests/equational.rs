mod support;

use std::time::{Duration, Instant};
use support::{naive_normalize, random_term, rng};
use websym_core::terms::is_normal;
use websym_core::{equiv, normalize, Func, Term};

fn msg() -> Term {
    Term::seq(vec![Term::lit("a"), Term::nonce("n", 7), Term::pair(Term::lit("b"), Term::Top)])
}

#[test]
fn asymmetric_decryption_inverts_encryption() {
    let k = Term::nonce("k", 1);
    let c = Term::enc_a(msg(), Term::pub_key(k.clone()));
    assert_eq!(normalize(&Term::dec_a(&c, &k)), msg());
    let wrong = Term::dec_a(&c, &Term::nonce("k", 2));
    assert_eq!(normalize(&wrong), wrong);
}

#[test]
fn symmetric_decryption_inverts_encryption() {
    let k = Term::nonce("k", 1);
    assert_eq!(normalize(&Term::dec_s(&Term::enc_s(msg(), k.clone()), &k)), msg());
    let wrong = Term::dec_s(&Term::enc_s(msg(), k), &Term::nonce("k", 2));
    assert_eq!(normalize(&wrong), wrong);
}

#[test]
fn signatures_verify_and_expose_their_message() {
    let k = Term::nonce("k", 1);
    let s = Term::sig(msg(), k.clone());
    assert_eq!(normalize(&Term::checksig(&s, &Term::pub_key(k))), Term::Top);
    assert_eq!(normalize(&Term::extractmsg(&s)), msg());
    let forged = Term::checksig(&s, &Term::pub_key(Term::nonce("k", 2)));
    assert_ne!(normalize(&forged), Term::Top);
}

#[test]
fn projection_of_a_decrypted_pair() {
    let k = Term::nonce("k", 1);
    let (a, b) = (Term::lit("a"), Term::lit("b"));
    let c = Term::enc_a(Term::pair(a.clone(), b), Term::pub_key(k.clone()));
    let t = Term::app(Func::Proj(1), vec![Term::dec_a(&c, &k)]);
    assert_eq!(normalize(&t), a);
    assert!(equiv(&t, &Term::lit("a")));
}

#[test]
fn out_of_range_projection_is_undefined() {
    let t = Term::app(Func::Proj(3), vec![Term::pair(Term::lit("a"), Term::lit("b"))]);
    assert_eq!(normalize(&t), Term::Undef);
    assert_eq!(normalize(&Term::app(Func::Proj(1), vec![Term::lit("a")])), Term::Undef);
}

const TERMS: u64 = 10_000;
const MAX_DEPTH: usize = 6;
const TIME_LIMIT: Duration = Duration::from_secs(5);

/// Normal forms are fixpoints, are free of redexes and agree with an outermost rewriter.
#[test]
fn normalize_is_idempotent_on_random_terms() {
    let mut r = rng(0x5eed);
    let start = Instant::now();
    let terms: Vec<Term> = (0..TERMS).map(|_| random_term(&mut r, MAX_DEPTH)).collect();
    let mut changed = 0;
    for t in &terms {
        let n = normalize(t);
        assert_eq!(normalize(&n), n, "not idempotent on {t}");
        assert!(is_normal(&n), "{n} still reducible");
        changed += usize::from(n != *t);
    }
    let elapsed = start.elapsed();
    assert!(elapsed < TIME_LIMIT, "took {elapsed:?}");
    // The generator must actually produce redexes for the check to mean anything.
    assert!(changed > TERMS as usize / 10, "only {changed} terms had redexes");
    for t in &terms {
        assert_eq!(normalize(t), naive_normalize(t), "strategies disagree on {t}");
    }
}
