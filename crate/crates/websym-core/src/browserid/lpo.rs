//! The login provider: serves the CIF and LD scripts, manages sessions and issues UCs.

use super::{path, sts_header, BROWSERID_STATE};
use crate::netmodel::{self, HttpResponse};
use crate::oracle::{Oracle, OracleError};
use crate::runtime::{Emission, Note, World};
use crate::terms::{dict_get, dict_keys, dict_put, dict_remove, tok, Term, Text};
use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpoState {
    pub owner: Text,
    pub nonces: Vec<Term>,
    pub next_nonce: u64,
    pub domain: Term,
    pub sslkey: Term,
    pub signkey: Term,
    /// Session id → ⟨ids, xsrfToken⟩.
    pub sessions: Term,
    /// Secret → sequence of IDs.
    pub secrets: Term,
}

impl LpoState {
    pub fn new(owner: impl Into<Text>, domain: Term, sslkey: Term, signkey: Term, secrets: Term) -> Self {
        LpoState { owner: owner.into(), nonces: Vec::new(), next_nonce: 0, domain, sslkey, signkey, sessions: Term::empty(), secrets }
    }

    pub fn to_term(&self) -> Term {
        Term::seq(vec![Term::seq(self.nonces.clone()), self.sslkey.clone(), self.signkey.clone(), self.sessions.clone(), self.secrets.clone()])
    }

    fn take_nonce(&mut self) -> Term {
        let n = Term::nonce(self.owner.clone(), self.next_nonce);
        self.next_nonce += 1;
        self.nonces.push(n.clone());
        n
    }

    /// Handles one event; the state is left untouched whenever no response is produced.
    pub fn relation(&mut self, receiver: &Term, sender: &Term, m: &Term, world: &World, oracle: &mut Oracle<'_>, notes: &mut Vec<Note>) -> Result<Vec<Emission>, OracleError> {
        if *m == tok::TRIGGER {
            let ids = dict_keys(&self.sessions);
            if ids.is_empty() {
                return Ok(Vec::new());
            }
            let sid = ids[oracle.choose("lpo.trigger.session", &ids)?].clone();
            let choice = oracle.choose("lpo.trigger.choice", &[Term::lit("logout"), Term::lit("expire")])?;
            self.sessions = if choice == 0 {
                let session = dict_get(&self.sessions, &sid);
                dict_put(&self.sessions, sid, session.with_item(1, Term::empty()))
            } else {
                dict_remove(&self.sessions, &sid)
            };
            return Ok(Vec::new());
        }
        let Some((req, key)) = netmodel::https_unwrap_request(m, &self.sslkey) else { return Ok(Vec::new()) };
        if req.host != self.domain {
            return Ok(Vec::new());
        }
        let original = self.clone();
        let respond = |headers: Term, body: Term| {
            let resp = HttpResponse { nonce: req.nonce.clone(), status: tok::STATUS_200, headers, body };
            vec![Emission { receiver: sender.clone(), sender: receiver.clone(), payload: netmodel::https_wrap_response(resp.to_term(), key.clone()) }]
        };
        let sid = dict_get(&req.header(&tok::COOKIE), &BROWSERID_STATE);
        let (method, p) = (&req.method, &req.path);
        if *method == tok::GET && *p == path::CIF {
            return Ok(respond(sts_header(), Term::pair(crate::scripts::LPO_CIF, super::cif::initial_state())));
        }
        if *method == tok::GET && *p == path::LD {
            return Ok(respond(sts_header(), Term::pair(crate::scripts::LPO_LD, super::ld::initial_state())));
        }
        if *method == tok::GET && *p == path::CTX {
            let mut sid = sid;
            if !dict_keys(&self.sessions).contains(&sid) {
                sid = self.take_nonce();
                let xsrf = self.take_nonce();
                self.sessions = crate::terms::seq_append(&self.sessions, Term::pair(sid.clone(), Term::pair(Term::empty(), xsrf)));
            }
            let result = dict_get(&self.sessions, &sid);
            let cookie = netmodel::cookie(BROWSERID_STATE, sid, true, world.fixes.session_cookie, true);
            let headers = Term::seq(vec![Term::pair(tok::STS, Term::Top), Term::pair(tok::SET_COOKIE, Term::seq(vec![cookie]))]);
            return Ok(respond(headers, result));
        }
        if *method == tok::POST && *p == path::AUTH {
            let [secret, xsrf] = req.body.items() else { return Ok(Vec::new()) };
            if dict_keys(&self.sessions).contains(&sid)
                && dict_keys(&self.secrets).contains(secret)
                && dict_get(&self.sessions, &sid).proj(2) == *xsrf
            {
                let ids = dict_get(&self.secrets, secret);
                let session = dict_get(&self.sessions, &sid).with_item(1, ids);
                self.sessions = dict_put(&self.sessions, sid, session);
                return Ok(respond(sts_header(), Term::Top));
            }
            return Ok(Vec::new());
        }
        if *method == tok::POST && *p == path::CERTREQ {
            let session = dict_get(&self.sessions, &sid);
            let [id, pubkey, xsrf] = req.body.items() else { return Ok(Vec::new()) };
            if session.proj(1).items().contains(id) && session.proj(2) == *xsrf {
                let uc = super::uc(id.clone(), pubkey.clone(), self.signkey.clone());
                notes.push(Note::UcIssued { uc: uc.clone() });
                return Ok(respond(sts_header(), uc));
            }
            return Ok(Vec::new());
        }
        *self = original;
        Ok(Vec::new())
    }
}
