//! A relying party: serves its index script and exchanges valid CAPs for service tokens.

use super::sts_header;
use crate::netmodel::{self, HttpResponse};
use crate::runtime::{Emission, Note};
use crate::terms::{dict_put, tok, Term, Text};
use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RpState {
    pub owner: Text,
    pub nonces: Vec<Term>,
    pub next_nonce: u64,
    pub sslkey: Term,
    pub domain: Term,
    pub pubk_lpo: Term,
    /// Token nonce → ID.
    pub service_tokens: Term,
}

impl RpState {
    pub fn new(owner: impl Into<Text>, domain: Term, sslkey: Term, pubk_lpo: Term) -> Self {
        RpState { owner: owner.into(), nonces: Vec::new(), next_nonce: 0, sslkey, domain, pubk_lpo, service_tokens: Term::empty() }
    }

    pub fn to_term(&self) -> Term {
        Term::seq(vec![Term::seq(self.nonces.clone()), self.sslkey.clone(), self.domain.clone(), self.pubk_lpo.clone(), self.service_tokens.clone()])
    }

    /// Issued tokens ⟨n, i⟩ in issue order.
    pub fn tokens(&self) -> Vec<Term> {
        self.service_tokens.items().to_vec()
    }

    pub fn relation(&mut self, receiver: &Term, sender: &Term, m: &Term, notes: &mut Vec<Note>) -> Vec<Emission> {
        let Some((req, key)) = netmodel::https_unwrap_request(m, &self.sslkey) else { return Vec::new() };
        if req.host != self.domain {
            return Vec::new();
        }
        let respond = |headers: Term, body: Term| {
            let resp = HttpResponse { nonce: req.nonce.clone(), status: tok::STATUS_200, headers, body };
            vec![Emission { receiver: sender.clone(), sender: receiver.clone(), payload: netmodel::https_wrap_response(resp.to_term(), key.clone()) }]
        };
        let own_origin = netmodel::origin(self.domain.clone(), tok::S);
        if req.method == tok::GET {
            return respond(sts_header(), Term::pair(crate::scripts::RP_INDEX, super::rp_index::initial_state()));
        }
        if req.method == tok::POST && req.header(&tok::ORIGIN) == own_origin {
            let [uc, ia] = req.body.items() else { return Vec::new() };
            let claim = Term::extractmsg(uc);
            let (i, pku) = (claim.proj(1), claim.proj(2));
            if Term::checksig(uc, &self.pubk_lpo) == Term::Top && Term::checksig(ia, &pku) == Term::Top && Term::extractmsg(ia) == own_origin {
                let n = Term::nonce(self.owner.clone(), self.next_nonce);
                self.next_nonce += 1;
                self.nonces.push(n.clone());
                self.service_tokens = dict_put(&self.service_tokens, n.clone(), i.clone());
                let token = Term::pair(n, i);
                notes.push(Note::TokenIssued { rp: self.owner.clone(), token: token.clone(), ia: ia.clone() });
                return respond(Term::empty(), token);
            }
        }
        Vec::new()
    }
}
