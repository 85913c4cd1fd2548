//! BrowserID with a secondary identity provider: credentials, LPO and RP servers, the three
//! honest scripts and the fix toggles.

pub mod cif;
pub mod ld;
pub mod lpo;
pub mod rp;
pub mod rp_index;

use crate::netmodel;
use crate::terms::{dict_get, dict_put, tok, Term, Text};
use alloc::vec;
use serde::{Deserialize, Serialize};

pub const BROWSERID_STATE: Term = Term::lit("browserid_state");
pub const KEY_PAIRS: Term = Term::lit("keyPairs");
pub const SITE_INFO: Term = Term::lit("siteInfo");

pub mod path {
    use crate::terms::Term;
    pub const ROOT: Term = Term::lit("/");
    pub const CIF: Term = Term::lit("/cif");
    pub const LD: Term = Term::lit("/ld");
    pub const CTX: Term = Term::lit("/ctx");
    pub const AUTH: Term = Term::lit("/auth");
    pub const CERTREQ: Term = Term::lit("/certreq");
}

/// Message tags exchanged by postMessage between the three scripts.
pub mod pm {
    use crate::terms::Term;
    pub const CIFREADY: Term = Term::lit("cifready");
    pub const LOADED: Term = Term::lit("loaded");
    pub const DLG_RUN: Term = Term::lit("dlgRun");
    pub const DLG_CMPLT: Term = Term::lit("dlgCmplt");
    pub const LOGGED_IN_USER: Term = Term::lit("loggedInUser");
    pub const LOGIN: Term = Term::lit("login");
    pub const LOGOUT: Term = Term::lit("logout");
    pub const LDREADY: Term = Term::lit("ldready");
    pub const REQUEST: Term = Term::lit("request");
    pub const RESPONSE: Term = Term::lit("response");
}

/// Which of the proposed fixes are applied; all on is the fixed system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Fixes {
    /// RP index checks origin and sender window of `login` and `response` messages.
    pub pm_origin_check: bool,
    /// Key pair and UC stay in script state instead of localStorage.
    pub local_storage_cleanup: bool,
    /// `browserid_state` is a session cookie.
    pub session_cookie: bool,
    /// Browsers start with the LPO domain on their STS list.
    pub sts_preload: bool,
}

impl Fixes {
    pub const ALL_ON: Fixes = Fixes { pm_origin_check: true, local_storage_cleanup: true, session_cookie: true, sts_preload: true };
    pub const NAMES: [&'static str; 4] = ["pm-origin-check", "local-storage-cleanup", "session-cookie", "sts-preload"];

    /// State of the named fix; `None` for an unknown name.
    pub fn get(&self, name: &str) -> Option<bool> {
        let mut copy = *self;
        copy.slot(name).map(|s| *s)
    }

    fn slot(&mut self, name: &str) -> Option<&mut bool> {
        Some(match name {
            "pm-origin-check" => &mut self.pm_origin_check,
            "local-storage-cleanup" => &mut self.local_storage_cleanup,
            "session-cookie" => &mut self.session_cookie,
            "sts-preload" => &mut self.sts_preload,
            _ => return None,
        })
    }

    /// Sets the named fix; false for an unknown name.
    pub fn set(&mut self, name: &str, on: bool) -> bool {
        match self.slot(name) {
            Some(slot) => {
                *slot = on;
                true
            }
            None => false,
        }
    }
}

impl Default for Fixes {
    fn default() -> Self {
        Fixes::ALL_ON
    }
}

/// An ID with the secret it belongs to and the browser owning that secret.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Identity {
    pub id: Term,
    pub secret: Term,
    pub owner: Text,
}

/// `⟨name, domain⟩`.
pub fn id(name: &str, domain: &str) -> Term {
    Term::pair(Term::str(name), Term::str(domain))
}

pub fn lpo_url(lpo_domain: &Term, p: Term) -> Term {
    netmodel::url(tok::S, lpo_domain.clone(), p, Term::empty())
}

pub fn lpo_origin(lpo_domain: &Term) -> Term {
    netmodel::origin(lpo_domain.clone(), tok::S)
}

/// `sig(⟨id, pub(k_u)⟩, k_LPO)`.
pub fn uc(id: Term, user_pub: Term, sign_key: Term) -> Term {
    Term::sig(Term::pair(id, user_pub), sign_key)
}

/// `sig(origin, k_u)`.
pub fn ia(origin: Term, user_key: Term) -> Term {
    Term::sig(origin, user_key)
}

pub fn cap(uc: Term, ia: Term) -> Term {
    Term::pair(uc, ia)
}

/// The ID certified by a UC.
pub fn uc_id(uc: &Term) -> Term {
    Term::extractmsg(uc).proj(1)
}

/// Without the key-cleanup fix, LPO scripts persist ⟨key, uc⟩ per ID in localStorage.
pub fn persist_key_pair(local_storage: &Term, key: &Term, uc: &Term) -> Term {
    let pairs = dict_get(local_storage, &KEY_PAIRS);
    let pairs = dict_put(&pairs, uc_id(uc), Term::pair(key.clone(), uc.clone()));
    dict_put(local_storage, KEY_PAIRS, pairs)
}

pub(crate) fn postmessage(target: Term, message: Term, origin: Term) -> Term {
    Term::seq(vec![tok::POSTMESSAGE, target, message, origin])
}

pub(crate) fn xhr(url: Term, method: Term, body: Term, reference: Term) -> Term {
    Term::seq(vec![tok::XHR, url, method, body, reference])
}

pub(crate) fn tagged(tag: Term, body: Term) -> Term {
    Term::pair(tag, body)
}

/// True iff `m` is ⟨tag, _⟩.
pub(crate) fn has_tag(m: &Term, tag: &Term) -> bool {
    m.items().len() == 2 && m.at(1) == Some(tag)
}

/// Finds the unhandled XHR response carrying `reference` and marks it handled at `handled_at`.
pub(crate) fn take_xhr(state: &Term, handled_at: usize, inputs: &Term, reference: &Term) -> Option<(Term, Term)> {
    let handled = state.proj(handled_at);
    let i = (1..=inputs.items().len()).find(|&i| {
        let input = inputs.proj(i);
        !handled.items().contains(&Term::nat(i)) && input.items().len() == 3 && input.proj(1) == tok::XHR && input.proj(3) == *reference
    })?;
    let body = inputs.proj(i).proj(2);
    Some((body, state.with_item(handled_at, crate::terms::seq_append(&handled, Term::nat(i)))))
}

/// A received postMessage split into sender window, sender origin and message.
pub(crate) fn as_postmessage(input: &Term) -> Option<(&Term, &Term, &Term)> {
    match input.as_seq()? {
        [h, window, origin, message] if *h == tok::POSTMESSAGE => Some((window, origin, message)),
        _ => None,
    }
}

/// STS header dictionary every LPO and RP response carries.
pub(crate) fn sts_header() -> Term {
    Term::seq(vec![Term::pair(tok::STS, Term::Top)])
}
