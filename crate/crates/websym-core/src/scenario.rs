//! Declarative scenarios and their initial configurations.

use crate::browser::BrowserState;
use crate::browserid::lpo::LpoState;
use crate::browserid::rp::RpState;
use crate::browserid::{self, path, pm, Fixes, Identity, BROWSERID_STATE, KEY_PAIRS};
use crate::derive::attacker::AttackerState;
use crate::netmodel;
use crate::oracle::{Choice, Vocabulary};
use crate::runtime::{Configuration, Process, ProcessState, World};
use crate::scripts::ScriptKind;
use crate::terms::{dict_get, dict_put, seq_append, tok, Term, Text};
use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrowserSpec {
    pub pid: String,
    pub address: Term,
}

/// A server party owning one domain and its TLS key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerSpec {
    pub pid: String,
    pub address: Term,
    pub domain: Term,
    pub key: Term,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpoSpec {
    #[serde(flatten)]
    pub server: ServerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign_key: Option<Term>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackerKind {
    /// Listens on and spoofs every address.
    Network,
    /// Listens on and sends from its own address only.
    Web,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainKey {
    pub domain: Term,
    pub key: Term,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackerSpec {
    pub pid: String,
    pub kind: AttackerKind,
    pub address: Term,
    pub domains: Vec<DomainKey>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentitySpec {
    pub id: Term,
    pub secret: Term,
    pub owner: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub runs: usize,
    pub max_steps: usize,
    pub recipe_depth: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub browsers: Vec<BrowserSpec>,
    pub rps: Vec<ServerSpec>,
    pub lpo: LpoSpec,
    pub attacker: AttackerSpec,
    pub identities: Vec<IdentitySpec>,
    pub fixes: Fixes,
    pub scripts: Vec<Term>,
    pub budget: Budget,
    pub seed: u64,
    #[serde(default)]
    pub schedules: BTreeMap<String, Vec<Choice>>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("address {0} is assigned to more than one party")]
    DuplicateAddress(Term),
    #[error("domain {0} is assigned to more than one party")]
    DuplicateDomain(Term),
    #[error("process id {0} is used twice")]
    DuplicatePid(String),
    #[error("the LPO has no signing key")]
    MissingSignKey,
    #[error("unknown script name {0}")]
    UnknownScript(Term),
    #[error("identity {id} is owned by {owner}, which is not a browser")]
    UnknownOwner { id: Term, owner: String },
    #[error("browser {0} holds more than one LPO secret")]
    SecondSecret(String),
}

impl Scenario {
    fn servers(&self) -> impl Iterator<Item = &ServerSpec> {
        self.rps.iter().chain(core::iter::once(&self.lpo.server))
    }

    /// Every declared address: browsers, RPs, LPO, attacker.
    pub fn addresses(&self) -> Vec<Term> {
        let mut a: Vec<Term> = self.browsers.iter().map(|b| b.address.clone()).collect();
        a.extend(self.servers().map(|s| s.address.clone()));
        a.push(self.attacker.address.clone());
        a
    }

    /// Domain → address as the DNS would answer honestly.
    pub fn dns_table(&self) -> Term {
        let mut t: Vec<Term> = self.servers().map(|s| Term::pair(s.domain.clone(), s.address.clone())).collect();
        t.extend(self.attacker.domains.iter().map(|d| Term::pair(d.domain.clone(), self.attacker.address.clone())));
        Term::seq(t)
    }

    /// Domain → public key, known to everyone.
    pub fn key_mapping(&self) -> Term {
        let mut m: Vec<Term> = self.servers().map(|s| Term::pair(s.domain.clone(), Term::pub_key(s.key.clone()))).collect();
        m.extend(self.attacker.domains.iter().map(|d| Term::pair(d.domain.clone(), Term::pub_key(d.key.clone()))));
        Term::seq(m)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut seen = BTreeSet::new();
        for a in self.addresses() {
            if !seen.insert(a.clone()) {
                return Err(ScenarioError::DuplicateAddress(a));
            }
        }
        let mut domains = BTreeSet::new();
        for d in self.servers().map(|s| &s.domain).chain(self.attacker.domains.iter().map(|d| &d.domain)) {
            if !domains.insert(d.clone()) {
                return Err(ScenarioError::DuplicateDomain(d.clone()));
            }
        }
        let mut pids = BTreeSet::new();
        for p in self.browsers.iter().map(|b| &b.pid).chain(self.servers().map(|s| &s.pid)).chain(core::iter::once(&self.attacker.pid)) {
            if !pids.insert(p.clone()) {
                return Err(ScenarioError::DuplicatePid(p.clone()));
            }
        }
        if self.lpo.sign_key.is_none() {
            return Err(ScenarioError::MissingSignKey);
        }
        if let Some(s) = self.scripts.iter().find(|s| ScriptKind::from_name(s).is_none()) {
            return Err(ScenarioError::UnknownScript(s.clone()));
        }
        let mut secret_of: BTreeMap<&str, &Term> = BTreeMap::new();
        for i in &self.identities {
            if !self.browsers.iter().any(|b| b.pid == i.owner) {
                return Err(ScenarioError::UnknownOwner { id: i.id.clone(), owner: i.owner.clone() });
            }
            if secret_of.insert(i.owner.as_str(), &i.secret).is_some_and(|prev| *prev != i.secret) {
                return Err(ScenarioError::SecondSecret(i.owner.clone()));
            }
        }
        Ok(())
    }

    pub fn world(&self) -> World {
        let lpo_domain = self.lpo.server.domain.clone();
        let mut domains: Vec<Term> = self.servers().map(|s| s.domain.clone()).collect();
        domains.extend(self.attacker.domains.iter().map(|d| d.domain.clone()));
        let mut urls = Vec::new();
        for rp in &self.rps {
            urls.push(netmodel::url(tok::S, rp.domain.clone(), path::ROOT, Term::empty()));
            urls.push(netmodel::url(tok::P, rp.domain.clone(), path::ROOT, Term::empty()));
        }
        for d in &self.attacker.domains {
            urls.push(netmodel::url(tok::P, d.domain.clone(), path::ROOT, Term::empty()));
            urls.push(netmodel::url(tok::S, d.domain.clone(), path::ROOT, Term::empty()));
        }
        let tokens = vec![
            pm::CIFREADY,
            pm::LOADED,
            pm::DLG_RUN,
            pm::DLG_CMPLT,
            pm::LOGGED_IN_USER,
            pm::LOGIN,
            pm::LOGOUT,
            pm::LDREADY,
            pm::REQUEST,
            pm::RESPONSE,
            BROWSERID_STATE,
            KEY_PAIRS,
            tok::ORIGIN,
            tok::COOKIE,
        ];
        World {
            addresses: self.addresses(),
            vocab: Vocabulary {
                addresses: self.addresses(),
                domains,
                paths: vec![path::ROOT, path::CIF, path::LD, path::CTX, path::AUTH, path::CERTREQ],
                urls,
                ids: self.identities.iter().map(|i| i.id.clone()).collect(),
                scripts: self.scripts.clone(),
                tokens,
                attacker_domains: self.attacker.domains.iter().map(|d| d.domain.clone()).collect(),
            },
            recipe_depth: self.budget.recipe_depth,
            fixes: self.fixes,
            lpo_domain,
            identities: self
                .identities
                .iter()
                .map(|i| Identity { id: i.id.clone(), secret: i.secret.clone(), owner: Text::from(i.owner.as_str()) })
                .collect(),
        }
    }

    /// The validated initial configuration with empty event pool.
    pub fn build(&self) -> Result<(World, Configuration), ScenarioError> {
        self.validate()?;
        let world = self.world();
        let key_mapping = self.key_mapping();
        let lpo_domain = &self.lpo.server.domain;
        let mut processes = Vec::new();
        for b in &self.browsers {
            let secrets = match self.identities.iter().find(|i| i.owner == b.pid) {
                Some(i) => Term::seq(vec![Term::pair(browserid::lpo_origin(lpo_domain), i.secret.clone())]),
                None => Term::empty(),
            };
            let sts = if self.fixes.sts_preload { vec![lpo_domain.clone()] } else { Vec::new() };
            let state = BrowserState::new(b.pid.as_str(), b.address.clone(), self.attacker.address.clone(), key_mapping.clone(), secrets, sts);
            processes.push(Process { pid: Text::from(b.pid.as_str()), listen: vec![b.address.clone()], state: ProcessState::Browser(Box::new(state)) });
        }
        let Some(sign_key) = self.lpo.sign_key.clone() else { return Err(ScenarioError::MissingSignKey) };
        for rp in &self.rps {
            let state = RpState::new(rp.pid.as_str(), rp.domain.clone(), rp.key.clone(), Term::pub_key(sign_key.clone()));
            processes.push(Process { pid: Text::from(rp.pid.as_str()), listen: vec![rp.address.clone()], state: ProcessState::Rp(state) });
        }
        let mut secrets = Term::empty();
        for i in &self.identities {
            let ids = seq_append(&dict_get(&secrets, &i.secret), i.id.clone());
            secrets = dict_put(&secrets, i.secret.clone(), ids);
        }
        let lpo = &self.lpo.server;
        let state = LpoState::new(lpo.pid.as_str(), lpo.domain.clone(), lpo.key.clone(), sign_key, secrets);
        processes.push(Process { pid: Text::from(lpo.pid.as_str()), listen: vec![lpo.address.clone()], state: ProcessState::Lpo(state) });
        let att = &self.attacker;
        let own = vec![att.address.clone()];
        let (listen, senders) = match att.kind {
            AttackerKind::Network => (world.addresses.clone(), world.addresses.clone()),
            AttackerKind::Web => (own.clone(), own),
        };
        let attdoms = Term::seq(att.domains.iter().map(|d| Term::pair(d.domain.clone(), d.key.clone())).collect());
        let state = AttackerState::new(att.pid.as_str(), listen.clone(), senders, vec![attdoms, key_mapping]);
        processes.push(Process { pid: Text::from(att.pid.as_str()), listen, state: ProcessState::Attacker(state) });
        Ok((world, Configuration { processes, pool: Vec::new() }))
    }
}

/// Names of the bundled scenarios.
pub const BUNDLED: [&str; 4] = ["fixed-sidp", "attack-login-injection", "attack-key-cleanup", "attack-cookie-cleanup"];

/// The shared party layout: alice in b1, eve in b2, one RP, the LPO and a network attacker at att.com.
pub fn base(name: &str) -> Scenario {
    let key = |i| Term::nonce("key", i);
    let server = |pid: &str, addr: &str, domain: &'static str, k| ServerSpec { pid: pid.into(), address: Term::addr(addr), domain: Term::lit(domain), key: key(k) };
    Scenario {
        name: name.into(),
        browsers: vec![BrowserSpec { pid: "b1".into(), address: Term::addr("B1") }, BrowserSpec { pid: "b2".into(), address: Term::addr("B2") }],
        rps: vec![server("rp", "RP", "rp.com", 0)],
        lpo: LpoSpec { server: server("lpo", "LPO", "lpo.com", 1), sign_key: Some(Term::nonce("sign", 0)) },
        attacker: AttackerSpec {
            pid: "att".into(),
            kind: AttackerKind::Network,
            address: Term::addr("ATT"),
            domains: vec![DomainKey { domain: Term::lit("att.com"), key: key(2) }],
        },
        identities: vec![
            IdentitySpec { id: browserid::id("alice", "lpo.com"), secret: Term::nonce("secret", 0), owner: "b1".into() },
            IdentitySpec { id: browserid::id("eve", "lpo.com"), secret: Term::nonce("secret", 1), owner: "b2".into() },
        ],
        fixes: Fixes::ALL_ON,
        scripts: ScriptKind::ALL.iter().map(|k| k.name()).collect(),
        budget: Budget { runs: 10_000, max_steps: 40, recipe_depth: 6 },
        seed: 2014,
        schedules: BTreeMap::new(),
    }
}

/// A bundled scenario without schedules; attack scenarios disable exactly their own fix.
pub fn bundled(name: &str) -> Option<Scenario> {
    let mut s = base(name);
    match name {
        "fixed-sidp" => {}
        "attack-login-injection" => s.fixes.pm_origin_check = false,
        "attack-key-cleanup" => s.fixes.local_storage_cleanup = false,
        "attack-cookie-cleanup" => s.fixes.session_cookie = false,
        _ => return None,
    }
    Some(s)
}
