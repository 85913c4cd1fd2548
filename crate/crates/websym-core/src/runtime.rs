//! Processes, events, configurations and the step/run loop every choice of which goes through
//! the oracle.

use crate::browser::{BrowserState, Next};
use crate::browserid::lpo::LpoState;
use crate::browserid::rp::RpState;
use crate::browserid::{Fixes, Identity};
use crate::derive::attacker::AttackerState;
use crate::derive::NoncePool;
use crate::netmodel;
use crate::oracle::{Choice, Oracle, OracleError, Vocabulary};
use crate::terms::{tok, Term, Text};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Provenance of the virtual trigger events that are always available.
pub const ENV: &str = "env";

/// A message a process hands back to the runtime; provenance is added on insertion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Emission {
    pub receiver: Term,
    pub sender: Term,
    pub payload: Term,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Event {
    pub receiver: Term,
    pub sender: Term,
    pub payload: Term,
    /// Emitting process; invisible to every relation.
    pub provenance: String,
}

impl Event {
    pub fn trigger(address: Term) -> Self {
        Event { receiver: address.clone(), sender: address, payload: tok::TRIGGER, provenance: ENV.to_string() }
    }

    pub fn is_trigger(&self) -> bool {
        self.provenance == ENV && self.payload == tok::TRIGGER
    }

    /// Candidate term offered at `runtime.event`.
    pub fn to_term(&self) -> Term {
        Term::seq(vec![self.receiver.clone(), self.sender.clone(), self.payload.clone(), Term::str(self.provenance.as_str())])
    }
}

/// Side observations reported by relations for monitors; they never influence a run.
#[derive(Clone, Debug)]
pub enum Note {
    ScriptRun { browser: Text, script: Term, input: Term, output: Term, pool: NoncePool, host_cookies: Term },
    RequestPrepared { browser: Text, host: Term, protocol: Term, cookie_header: Term, host_cookies: Term },
    CorruptEmission { browser: Text, state: Term, pool: NoncePool, recipe: Term, emitted: Term },
    UcIssued { uc: Term },
    TokenIssued { rp: Text, token: Term, ia: Term },
}

/// Static facts every relation may consult.
#[derive(Clone, Debug)]
pub struct World {
    /// The declared address universe.
    pub addresses: Vec<Term>,
    pub vocab: Vocabulary,
    pub recipe_depth: usize,
    pub fixes: Fixes,
    pub lpo_domain: Term,
    pub identities: Vec<Identity>,
}

impl World {
    /// Owner of the identity `id`, if any.
    pub fn owner_of(&self, id: &Term) -> Option<&Text> {
        self.identities.iter().find(|i| i.id == *id).map(|i| &i.owner)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DnsState {
    /// Domain → address.
    pub table: Term,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProcessState {
    Browser(alloc::boxed::Box<BrowserState>),
    Lpo(LpoState),
    Rp(RpState),
    Dns(DnsState),
    Attacker(AttackerState),
}

impl ProcessState {
    pub fn to_term(&self) -> Term {
        match self {
            ProcessState::Browser(b) => b.to_term(),
            ProcessState::Lpo(l) => l.to_term(),
            ProcessState::Rp(r) => r.to_term(),
            ProcessState::Dns(d) => d.table.clone(),
            ProcessState::Attacker(a) => a.to_term(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Process {
    pub pid: Text,
    pub listen: Vec<Term>,
    pub state: ProcessState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    pub processes: Vec<Process>,
    /// Multiset of pending events in insertion order.
    pub pool: Vec<Event>,
}

impl Configuration {
    pub fn process(&self, pid: &str) -> Option<&Process> {
        self.processes.iter().find(|p| p.pid.as_str() == pid)
    }

    pub fn browsers(&self) -> impl Iterator<Item = (&Text, &BrowserState)> {
        self.processes.iter().filter_map(|p| match &p.state {
            ProcessState::Browser(b) => Some((&p.pid, &**b)),
            _ => None,
        })
    }

    pub fn rps(&self) -> impl Iterator<Item = &RpState> {
        self.processes.iter().filter_map(|p| match &p.state {
            ProcessState::Rp(r) => Some(r),
            _ => None,
        })
    }

    pub fn attackers(&self) -> impl Iterator<Item = &AttackerState> {
        self.processes.iter().filter_map(|p| match &p.state {
            ProcessState::Attacker(a) => Some(a),
            _ => None,
        })
    }

    pub fn lpo(&self) -> Option<&LpoState> {
        self.processes.iter().find_map(|p| match &p.state {
            ProcessState::Lpo(l) => Some(l),
            _ => None,
        })
    }

    /// Deliverable events: distinct pool events with a listener, plus one trigger per listened address,
    /// in serialization order.
    pub fn candidates(&self) -> Vec<Event> {
        let listened = |a: &Term| self.processes.iter().any(|p| p.listen.contains(a));
        let mut out: Vec<(String, Event)> = Vec::new();
        for e in &self.pool {
            if listened(&e.receiver) {
                out.push((e.to_term().render(), e.clone()));
            }
        }
        for p in &self.processes {
            for a in &p.listen {
                let e = Event::trigger(a.clone());
                out.push((e.to_term().render(), e));
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out.dedup_by(|a, b| a.0 == b.0);
        out.into_iter().map(|(_, e)| e).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delta {
    pub changed: bool,
    /// SHA-256 of the receiving process's state after the step.
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub event: Event,
    pub process: String,
    pub choices: Vec<Choice>,
    pub emitted: Vec<Event>,
    pub delta: Delta,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Status {
    /// The oracle declined to pick another event.
    Complete,
    MaxSteps,
    /// A monitor asked to stop, normally at the first violation.
    Stopped,
    /// Guided schedule ran out inside a step.
    Exhausted { step: usize, label: String },
    Infeasible { step: usize, label: String, reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<StepRecord>,
    pub status: Status,
    /// Choices resolved inside the step that did not complete.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pending: Vec<Choice>,
}

impl Trace {
    /// Every choice in order; replaying it reproduces the trace.
    pub fn schedule(&self) -> Vec<Choice> {
        self.steps.iter().flat_map(|s| s.choices.iter().cloned()).chain(self.pending.iter().cloned()).collect()
    }
}

/// Observes each committed step; must not affect the run.
pub trait Monitor {
    fn observe(&mut self, world: &World, config: &Configuration, record: &StepRecord, notes: &[Note]);

    fn stop(&self) -> bool {
        false
    }
}

pub struct NoMonitor;

impl Monitor for NoMonitor {
    fn observe(&mut self, _: &World, _: &Configuration, _: &StepRecord, _: &[Note]) {}
}

pub fn digest(t: &Term) -> String {
    hex::encode(Sha256::digest(t.render().as_bytes()))
}

/// Failure inside a step; the configuration is untouched and the choices made so far are kept.
#[derive(Clone, Debug)]
pub struct StepError {
    pub error: OracleError,
    pub choices: Vec<Choice>,
}

/// One processing step; on success the configuration has advanced and the record is returned.
pub fn step(world: &World, config: &mut Configuration, oracle: &mut Oracle<'_>, index: usize, notes: &mut Vec<Note>) -> Result<StepRecord, StepError> {
    let fail = |error: OracleError, oracle: &mut Oracle<'_>| StepError { error, choices: oracle.take_log() };
    let candidates = config.candidates();
    let terms: Vec<Term> = candidates.iter().map(Event::to_term).collect();
    let event = match oracle.choose("runtime.event", &terms) {
        Ok(i) => candidates[i].clone(),
        Err(e) => return Err(fail(e, oracle)),
    };
    let mut listeners: Vec<usize> = (0..config.processes.len()).filter(|&i| config.processes[i].listen.contains(&event.receiver)).collect();
    listeners.sort_by(|&a, &b| config.processes[a].pid.cmp(&config.processes[b].pid));
    let pids: Vec<Term> = listeners.iter().map(|&i| Term::str(config.processes[i].pid.clone())).collect();
    let pi = match oracle.choose("runtime.receiver", &pids) {
        Ok(i) => listeners[i],
        Err(e) => return Err(fail(e, oracle)),
    };
    let process = &config.processes[pi];
    let mut state = process.state.clone();
    let (r, s, m) = (&event.receiver, &event.sender, &event.payload);
    let outcome = match &mut state {
        ProcessState::Browser(b) => b.relation(r, s, m, world, oracle, notes).map(|next| match next {
            Next::Keep => Vec::new(),
            Next::Update(out) => out,
        }),
        ProcessState::Lpo(l) => l.relation(r, s, m, world, oracle, notes),
        ProcessState::Rp(rp) => Ok(rp.relation(r, s, m, notes)),
        ProcessState::Dns(d) => Ok(netmodel::dns_relation(m, &d.table).map(|reply| Emission { receiver: s.clone(), sender: r.clone(), payload: reply }).into_iter().collect()),
        ProcessState::Attacker(a) => a.relation(r, s, m, world, oracle),
    };
    let out = match outcome {
        Ok(out) => out,
        Err(e) => return Err(fail(e, oracle)),
    };
    let pid = process.pid.to_string();
    let after = state.to_term();
    let changed = state != process.state;
    config.processes[pi].state = state;
    if !event.is_trigger() {
        if let Some(k) = config.pool.iter().position(|e| *e == event) {
            config.pool.remove(k);
        }
    }
    // Events outside the address universe have no receiver and are dropped.
    let emitted: Vec<Event> = out
        .into_iter()
        .filter(|e| world.addresses.contains(&e.receiver) && world.addresses.contains(&e.sender))
        .map(|e| Event { receiver: e.receiver, sender: e.sender, payload: e.payload, provenance: pid.clone() })
        .collect();
    config.pool.extend(emitted.iter().cloned());
    Ok(StepRecord { index, event, process: pid, choices: oracle.take_log(), emitted, delta: Delta { changed, digest: digest(&after) } })
}

/// Steps until `max_steps`, oracle refusal, or a monitor stop.
pub fn run(world: &World, config: &mut Configuration, oracle: &mut Oracle<'_>, max_steps: usize, monitor: &mut dyn Monitor) -> Trace {
    let mut steps = Vec::new();
    let mut notes = Vec::new();
    for index in 0..max_steps {
        notes.clear();
        match step(world, config, oracle, index, &mut notes) {
            Ok(record) => {
                monitor.observe(world, config, &record, &notes);
                steps.push(record);
                if monitor.stop() {
                    return Trace { steps, status: Status::Stopped, pending: Vec::new() };
                }
            }
            Err(StepError { error: OracleError::Exhausted { label }, choices }) => {
                let status = if choices.is_empty() && label == "runtime.event" { Status::Complete } else { Status::Exhausted { step: index, label } };
                return Trace { steps, status, pending: choices };
            }
            Err(StepError { error: OracleError::Infeasible { label, reason }, choices }) => {
                return Trace { steps, status: Status::Infeasible { step: index, label, reason }, pending: choices };
            }
        }
    }
    Trace { steps, status: Status::MaxSteps, pending: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::GuidedDecider;

    fn world() -> World {
        World {
            addresses: vec![Term::addr("DNS"), Term::addr("C"), Term::addr("RP")],
            vocab: Vocabulary::default(),
            recipe_depth: 4,
            fixes: Fixes::ALL_ON,
            lpo_domain: Term::lit("lpo.com"),
            identities: Vec::new(),
        }
    }

    fn dns_config() -> Configuration {
        let table = Term::seq(vec![Term::pair(Term::lit("rp.com"), Term::addr("RP"))]);
        Configuration {
            processes: vec![Process { pid: Text::from("dns"), listen: vec![Term::addr("DNS")], state: ProcessState::Dns(DnsState { table }) }],
            pool: Vec::new(),
        }
    }

    #[test]
    fn zero_steps_give_an_empty_trace() {
        let mut g = GuidedDecider::new(vec![]);
        let mut o = Oracle::new(&mut g);
        let t = run(&world(), &mut dns_config(), &mut o, 0, &mut NoMonitor);
        assert!(t.steps.is_empty());
        assert_eq!(t.status, Status::MaxSteps);
    }

    #[test]
    fn trigger_to_dns_changes_nothing() {
        let mut c = dns_config();
        let before = c.clone();
        let mut g = GuidedDecider::new(vec![]);
        let mut o = Oracle::new(&mut g);
        let r = step(&world(), &mut c, &mut o, 0, &mut Vec::new()).unwrap();
        assert!(r.event.is_trigger());
        assert!(!r.delta.changed);
        assert!(r.emitted.is_empty());
        assert_eq!(c, before);
    }

    #[test]
    fn dns_request_is_answered() {
        let mut c = dns_config();
        let n = Term::nonce("c", 0);
        let q = Event { receiver: Term::addr("DNS"), sender: Term::addr("C"), payload: netmodel::dns_request(Term::lit("rp.com"), n.clone()), provenance: "c".into() };
        c.pool.push(q.clone());
        let candidates = c.candidates();
        let i = candidates.iter().position(|e| *e == q).unwrap();
        let mut g = GuidedDecider::new(vec![Choice::pick("runtime.event", i)]);
        let mut o = Oracle::new(&mut g);
        let r = step(&world(), &mut c, &mut o, 0, &mut Vec::new()).unwrap();
        assert_eq!(r.emitted.len(), 1);
        assert_eq!(r.emitted[0].payload, netmodel::dns_response(Term::addr("RP"), n));
        assert_eq!(r.emitted[0].provenance, "dns");
        assert_eq!(c.pool, r.emitted);
    }

    #[test]
    fn shared_address_asks_for_the_receiver() {
        let mut c = dns_config();
        let mut second = c.processes[0].clone();
        second.pid = Text::from("dns2");
        c.processes.push(second);
        let mut g = GuidedDecider::new(vec![Choice::pick("runtime.receiver", 1)]);
        let mut o = Oracle::new(&mut g);
        let r = step(&world(), &mut c, &mut o, 0, &mut Vec::new()).unwrap();
        assert_eq!(r.process, "dns2");
    }

    #[test]
    fn exhausted_schedule_at_event_choice_completes() {
        let mut c = dns_config();
        c.pool.push(Event { receiver: Term::addr("DNS"), sender: Term::addr("C"), payload: Term::lit("x"), provenance: "c".into() });
        let mut g = GuidedDecider::new(vec![]);
        let mut o = Oracle::new(&mut g);
        let t = run(&world(), &mut c, &mut o, 10, &mut NoMonitor);
        assert_eq!(t.status, Status::Complete);
        assert!(t.steps.is_empty());
    }
}
