//! Run monitors: security Conditions A and B and the structural invariants of the model.

use crate::browser::{Corruption, Window};
use crate::derive::{derivable, eval_recipe};
use crate::netmodel::{self, field};
use crate::runtime::{Configuration, Monitor, Note, StepRecord, World};
use crate::terms::{tok, Term, Text};
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CONDITION_A: &str = "condition-a";
pub const CONDITION_B: &str = "condition-b";
pub const ONE_ACTIVE_DOCUMENT: &str = "one-active-document";
pub const CORRUPTION_MONOTONE: &str = "corruption-monotone";
pub const COOKIE_FLAGS: &str = "cookie-flags";
pub const NONCE_UNIQUENESS: &str = "nonce-uniqueness";
pub const TOKEN_FRESHNESS: &str = "token-freshness";
pub const SCRIPT_OUTPUT_DERIVABLE: &str = "script-output-derivable";
pub const CORRUPT_EMISSION_DERIVABLE: &str = "corrupt-emission-derivable";

pub const SECURITY: [&str; 2] = [CONDITION_A, CONDITION_B];
pub const STRUCTURAL: [&str; 7] =
    [ONE_ACTIVE_DOCUMENT, CORRUPTION_MONOTONE, COOKIE_FLAGS, NONCE_UNIQUENESS, TOKEN_FRESHNESS, SCRIPT_OUTPUT_DERIVABLE, CORRUPT_EMISSION_DERIVABLE];

/// One script step in this many is re-checked for derivability.
pub const SCRIPT_SAMPLE_MODULUS: u8 = 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    HoldsSoFar,
    Violated,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub step: usize,
    pub explanation: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub property: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl Verdict {
    pub fn is_violated(&self) -> bool {
        self.status == Status::Violated
    }

    pub fn is_security(&self) -> bool {
        SECURITY.contains(&self.property.as_str())
    }
}

/// Issued token with the emitter of the request that obtained it.
#[derive(Clone, Debug)]
struct Issued {
    token: Term,
    provenance: String,
    step: usize,
}

/// Which monitor families run; all by default.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Selection {
    pub security: bool,
    pub structural: bool,
}

impl Default for Selection {
    fn default() -> Self {
        Selection { security: true, structural: true }
    }
}

/// Evaluates every selected property after each step and keeps the first witness of each.
#[derive(Clone, Debug)]
pub struct Monitors {
    selection: Selection,
    stop_on_violation: bool,
    verdicts: BTreeMap<&'static str, Option<Witness>>,
    issued: Vec<Issued>,
    corruption: BTreeMap<Text, Corruption>,
    script_steps: usize,
    sampled: usize,
}

impl Monitors {
    pub fn new(selection: Selection, stop_on_violation: bool) -> Self {
        let mut verdicts = BTreeMap::new();
        if selection.security {
            verdicts.extend(SECURITY.iter().map(|p| (*p, None)));
        }
        if selection.structural {
            verdicts.extend(STRUCTURAL.iter().map(|p| (*p, None)));
        }
        Monitors { selection, stop_on_violation, verdicts, issued: Vec::new(), corruption: BTreeMap::new(), script_steps: 0, sampled: 0 }
    }

    pub fn none() -> Self {
        Monitors::new(Selection { security: false, structural: false }, false)
    }

    pub fn verdicts(&self) -> Vec<Verdict> {
        self.verdicts
            .iter()
            .map(|(p, w)| Verdict {
                property: p.to_string(),
                status: if w.is_some() { Status::Violated } else { Status::HoldsSoFar },
                witness: w.clone(),
            })
            .collect()
    }

    pub fn any_violation(&self) -> bool {
        self.verdicts.values().any(Option::is_some)
    }

    /// Script steps seen and how many of them were sampled.
    pub fn script_sampling(&self) -> (usize, usize) {
        (self.script_steps, self.sampled)
    }

    fn flag(&mut self, property: &'static str, step: usize, explanation: String) {
        if let Some(slot) = self.verdicts.get_mut(property) {
            if slot.is_none() {
                *slot = Some(Witness { step, explanation });
            }
        }
    }

    fn security(&mut self, world: &World, config: &Configuration, record: &StepRecord, notes: &[Note]) {
        for note in notes {
            if let Note::TokenIssued { token, .. } = note {
                self.issued.push(Issued { token: token.clone(), provenance: record.event.provenance.clone(), step: record.index });
            }
        }
        if let Some(v) = condition_a(world, config) {
            self.flag(CONDITION_A, record.index, v);
        }
        let corruption: BTreeMap<&str, Corruption> = config.browsers().map(|(pid, b)| (pid.as_str(), b.corruption)).collect();
        for issued in &self.issued {
            let Some(c) = corruption.get(issued.provenance.as_str()) else { continue };
            let owner = world.owner_of(&issued.token.proj(2));
            if *c == Corruption::Honest && owner.map(Text::as_str) != Some(issued.provenance.as_str()) {
                let explanation = format!(
                    "token {} issued at step {} for a request sent by honest browser {} but owned by {}",
                    issued.token,
                    issued.step,
                    issued.provenance,
                    owner.map_or("nobody", Text::as_str)
                );
                let step = record.index;
                if self.verdicts.get(CONDITION_B).is_some_and(Option::is_none) {
                    self.verdicts.insert(CONDITION_B, Some(Witness { step, explanation }));
                }
            }
        }
    }

    fn structural(&mut self, config: &Configuration, record: &StepRecord, notes: &[Note]) {
        let step = record.index;
        for (pid, b) in config.browsers() {
            if let Some(bad) = b.windows.iter().find_map(bad_window) {
                self.flag(ONE_ACTIVE_DOCUMENT, step, format!("browser {pid}: window {bad} breaks the one-active-document rule"));
            }
            if let Some(prev) = self.corruption.insert(pid.clone(), b.corruption) {
                if prev != Corruption::Honest && prev != b.corruption {
                    self.flag(CORRUPTION_MONOTONE, step, format!("browser {pid} went from {:?} to {:?}", prev, b.corruption));
                }
            }
            if let Some(n) = duplicate(&b.nonces) {
                self.flag(NONCE_UNIQUENESS, step, format!("browser {pid} used nonce {n} twice"));
            }
        }
        if let Some(n) = config.lpo().and_then(|l| duplicate(&l.nonces)) {
            self.flag(NONCE_UNIQUENESS, step, format!("LPO used nonce {n} twice"));
        }
        for rp in config.rps() {
            if let Some(n) = duplicate(&rp.nonces) {
                self.flag(NONCE_UNIQUENESS, step, format!("RP {} used nonce {n} twice", rp.owner));
            }
            let token_nonces: Vec<Term> = rp.tokens().iter().map(|t| t.proj(1)).collect();
            if let Some(n) = duplicate(&token_nonces) {
                self.flag(TOKEN_FRESHNESS, step, format!("RP {} issued token nonce {n} twice", rp.owner));
            }
        }
        for note in notes {
            match note {
                Note::RequestPrepared { browser, protocol, cookie_header, host_cookies, .. } => {
                    for sent in cookie_header.items() {
                        let ok = host_cookies.items().iter().any(|c| {
                            c.proj(field::cookie::NAME) == sent.proj(1)
                                && netmodel::cookie_value(c) == sent.proj(2)
                                && (!netmodel::cookie_flag(c, field::cookie::SECURE) || *protocol == tok::S)
                        });
                        if !ok {
                            self.flag(COOKIE_FLAGS, step, format!("browser {browser} sent cookie {sent} over {protocol} against its flags"));
                        }
                    }
                }
                Note::ScriptRun { browser, script, input, output, pool, host_cookies } => {
                    for seen in input.proj(5).items() {
                        let ok = host_cookies
                            .items()
                            .iter()
                            .any(|c| c.proj(field::cookie::NAME) == seen.proj(1) && !netmodel::cookie_flag(c, field::cookie::HTTP_ONLY));
                        if !ok {
                            self.flag(COOKIE_FLAGS, step, format!("script {script} in browser {browser} saw cookie {seen}"));
                        }
                    }
                    self.script_steps += 1;
                    if sampled(step, input) {
                        self.sampled += 1;
                        if !derivable(output, core::slice::from_ref(input), pool.clone()) {
                            self.flag(SCRIPT_OUTPUT_DERIVABLE, step, format!("script {script} in browser {browser} produced an underivable output"));
                        }
                    }
                }
                Note::CorruptEmission { browser, state, pool, recipe, emitted }
                    if eval_recipe(recipe, core::slice::from_ref(state), pool).ok().as_ref() != Some(emitted) =>
                {
                    self.flag(CORRUPT_EMISSION_DERIVABLE, step, format!("corrupted browser {browser} emitted {emitted} not produced by its recipe"));
                }
                _ => {}
            }
        }
    }
}

impl Monitor for Monitors {
    fn observe(&mut self, world: &World, config: &Configuration, record: &StepRecord, notes: &[Note]) {
        if self.selection.security {
            self.security(world, config, record, notes);
        }
        if self.selection.structural {
            self.structural(config, record, notes);
        }
    }

    fn stop(&self) -> bool {
        self.stop_on_violation && self.any_violation()
    }
}

/// Deterministic 1-in-`SCRIPT_SAMPLE_MODULUS` sample keyed by step index and script input.
///
/// The step index is part of the key so a recurring input is not excluded from every run.
pub fn sampled(step: usize, input: &Term) -> bool {
    let mut h = Sha256::new();
    h.update((step as u64).to_le_bytes());
    h.update(input.render().as_bytes());
    h.finalize()[0] % SCRIPT_SAMPLE_MODULUS == 0
}

fn duplicate(xs: &[Term]) -> Option<&Term> {
    let mut seen = BTreeSet::new();
    xs.iter().find(|x| !seen.insert(*x))
}

fn bad_window(w: &Window) -> Option<Term> {
    let active = w.documents.iter().filter(|d| d.active).count();
    if !w.documents.is_empty() && active != 1 {
        return Some(w.nonce.clone());
    }
    w.documents.iter().flat_map(|d| d.subwindows.iter()).find_map(bad_window)
}

/// Explanation of the first token the attacker can derive although its owner is not fully corrupted.
pub fn condition_a(world: &World, config: &Configuration) -> Option<String> {
    for rp in config.rps() {
        for token in rp.tokens() {
            let Some(owner) = world.owner_of(&token.proj(2)) else { continue };
            let Some((_, b)) = config.browsers().find(|(pid, _)| *pid == owner) else { continue };
            if b.corruption == Corruption::Full {
                continue;
            }
            for att in config.attackers() {
                if let Some(recipe) = att.analysis().synthesize(&token) {
                    return Some(format!("attacker {} derives token {} of {:?} browser {} via {}", att.owner, token, b.corruption, owner, recipe));
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::browser::{BrowserState, Document};
    use crate::browserid::lpo::LpoState;
    use crate::browserid::rp::RpState;
    use crate::browserid::{Fixes, Identity};
    use crate::derive::attacker::AttackerState;
    use crate::oracle::Vocabulary;
    use crate::runtime::{Delta, Event, Process, ProcessState};
    use alloc::boxed::Box;
    use alloc::vec;

    fn world() -> World {
        World {
            addresses: vec![Term::addr("B"), Term::addr("RP"), Term::addr("ATT")],
            vocab: Vocabulary::default(),
            recipe_depth: 4,
            fixes: Fixes::ALL_ON,
            lpo_domain: Term::lit("lpo.com"),
            identities: vec![Identity { id: Term::lit("alice"), secret: Term::nonce("secret", 0), owner: Text::from("b") }],
        }
    }

    fn config(token_known: bool, corruption: Corruption) -> Configuration {
        let mut b = BrowserState::new("b", Term::addr("B"), Term::addr("ATT"), Term::empty(), Term::empty(), Vec::new());
        b.corruption = corruption;
        let mut rp = RpState::new("rp", Term::lit("rp.com"), Term::nonce("key", 0), Term::empty());
        rp.service_tokens = Term::seq(vec![Term::pair(Term::nonce("rp", 0), Term::lit("alice"))]);
        let mut att = AttackerState::new("att", vec![Term::addr("ATT")], vec![Term::addr("ATT")], Vec::new());
        if token_known {
            att.record(&Term::addr("ATT"), &Term::addr("RP"), &Term::pair(Term::nonce("rp", 0), Term::lit("alice")));
        }
        let lpo = LpoState::new("lpo", Term::lit("lpo.com"), Term::nonce("key", 1), Term::nonce("sign", 0), Term::empty());
        Configuration {
            processes: vec![
                Process { pid: Text::from("b"), listen: vec![Term::addr("B")], state: ProcessState::Browser(Box::new(b)) },
                Process { pid: Text::from("rp"), listen: vec![Term::addr("RP")], state: ProcessState::Rp(rp) },
                Process { pid: Text::from("lpo"), listen: Vec::new(), state: ProcessState::Lpo(lpo) },
                Process { pid: Text::from("att"), listen: vec![Term::addr("ATT")], state: ProcessState::Attacker(att) },
            ],
            pool: Vec::new(),
        }
    }

    fn record(index: usize, provenance: &str) -> StepRecord {
        StepRecord {
            index,
            event: Event { receiver: Term::addr("RP"), sender: Term::addr("B"), payload: Term::empty(), provenance: provenance.into() },
            process: "rp".into(),
            choices: Vec::new(),
            emitted: Vec::new(),
            delta: Delta { changed: true, digest: String::new() },
        }
    }

    fn issued() -> Vec<Note> {
        vec![Note::TokenIssued { rp: Text::from("rp"), token: Term::pair(Term::nonce("rp", 0), Term::lit("alice")), ia: Term::empty() }]
    }

    #[test]
    fn condition_a_holds_without_tokens_or_for_fully_corrupted_owner() {
        let mut c = config(false, Corruption::Honest);
        if let ProcessState::Rp(rp) = &mut c.processes[1].state {
            rp.service_tokens = Term::empty();
        }
        assert_eq!(condition_a(&world(), &c), None);
        assert_eq!(condition_a(&world(), &config(true, Corruption::Full)), None);
    }

    #[test]
    fn condition_a_flags_known_token_of_close_corrupted_owner() {
        assert!(condition_a(&world(), &config(true, Corruption::Close)).is_some());
        assert!(condition_a(&world(), &config(false, Corruption::Close)).is_none());
    }

    #[test]
    fn condition_b_depends_on_emitter() {
        let c = config(false, Corruption::Honest);
        let mut own = Monitors::new(Selection::default(), false);
        own.observe(&world(), &c, &record(0, "b"), &issued());
        assert!(!own.any_violation());
        let mut att = Monitors::new(Selection::default(), false);
        att.observe(&world(), &c, &record(0, "att"), &issued());
        assert!(!att.any_violation());
        let mut other = world();
        other.identities[0].owner = Text::from("b2");
        let mut foreign = Monitors::new(Selection::default(), true);
        foreign.observe(&other, &c, &record(0, "b"), &issued());
        let v = foreign.verdicts();
        assert!(v.iter().any(|v| v.property == CONDITION_B && v.is_violated()));
        assert!(foreign.stop());
    }

    #[test]
    fn duplicate_active_document_is_flagged() {
        let mut c = config(false, Corruption::Honest);
        let doc = |n| Document {
            nonce: Term::nonce("b", n),
            origin: Term::empty(),
            script: Term::empty(),
            scriptstate: Term::empty(),
            scriptinput: Vec::new(),
            subwindows: Vec::new(),
            active: true,
        };
        if let ProcessState::Browser(b) = &mut c.processes[0].state {
            b.windows.push(Window { nonce: Term::nonce("b", 0), documents: vec![doc(1), doc(2)], opener: Term::Bot });
        }
        let mut m = Monitors::new(Selection { security: false, structural: true }, false);
        m.observe(&world(), &c, &record(3, "env"), &[]);
        let flagged: Vec<Verdict> = m.verdicts().into_iter().filter(Verdict::is_violated).collect();
        assert_eq!(flagged.len(), 1);
        assert_eq!(flagged[0].property, ONE_ACTIVE_DOCUMENT);
        assert_eq!(flagged[0].witness.as_ref().unwrap().step, 3);
    }

    #[test]
    fn uncorrupting_a_browser_is_flagged() {
        let mut m = Monitors::new(Selection { security: false, structural: true }, false);
        m.observe(&world(), &config(false, Corruption::Close), &record(0, "env"), &[]);
        assert!(!m.any_violation());
        m.observe(&world(), &config(false, Corruption::Honest), &record(1, "env"), &[]);
        assert!(m.verdicts().iter().any(|v| v.property == CORRUPTION_MONOTONE && v.is_violated()));
    }

    #[test]
    fn empty_selection_never_reports() {
        let mut m = Monitors::none();
        m.observe(&world(), &config(true, Corruption::Close), &record(0, "b"), &issued());
        assert!(m.verdicts().is_empty());
    }
}
