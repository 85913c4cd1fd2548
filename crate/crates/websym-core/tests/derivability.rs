mod support;

use rand::Rng;
use std::collections::BTreeSet;
use std::time::{Duration, Instant};
use support::{atoms, closure_derivable, random_message, rng};
use websym_core::derive::{derivable, NoncePool};
use websym_core::Term;

const SETS: usize = 1_000;
const TARGETS_PER_SET: usize = 8;
const TIME_LIMIT: Duration = Duration::from_secs(60);

fn pool(r: &mut rand_chacha::ChaCha8Rng) -> NoncePool {
    match r.random_range(0..3) {
        0 => NoncePool::None,
        1 => NoncePool::Owner("k".into()),
        _ => NoncePool::Set(BTreeSet::from([atoms()[2].as_nonce().unwrap().clone()])),
    }
}

#[test]
fn engine_agrees_with_closure_oracle() {
    let mut r = rng(0xd011);
    let start = Instant::now();
    let (mut checked, mut positive, mut disagreements) = (0, 0, Vec::new());
    for _ in 0..SETS {
        let knowledge: Vec<Term> = (0..r.random_range(1..=4)).map(|_| random_message(&mut r, 3)).collect();
        let pool = pool(&mut r);
        let mut targets: Vec<Term> = atoms().to_vec();
        targets.extend((0..TARGETS_PER_SET).map(|_| random_message(&mut r, 3)));
        for t in &targets {
            let expected = closure_derivable(&knowledge, &pool, t);
            checked += 1;
            positive += usize::from(expected);
            if derivable(t, &knowledge, pool.clone()) != expected {
                disagreements.push(format!("{t} from {knowledge:?} ({pool:?}): oracle says {expected}"));
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(disagreements.is_empty(), "{} disagreements, first: {}", disagreements.len(), disagreements[0]);
    assert!(elapsed < TIME_LIMIT, "took {elapsed:?}");
    // Both answers must occur often enough to exercise the engine.
    assert!(positive > checked / 10 && positive < checked * 9 / 10, "{positive} of {checked} derivable");
}
