//! The LPO communication iframe embedded in the RP's page.

use super::{as_postmessage, lpo_url, path, persist_key_pair, pm, postmessage, tagged, take_xhr, xhr, SITE_INFO};
use crate::oracle::{Oracle, OracleError};
use crate::runtime::World;
use crate::scripts::{choose_input, tree, NonceSource, ScriptInput};
use crate::terms::{dict_get, elem_of, tok, Term};
use alloc::vec;

/// ⟨q, parentOrigin, loggedInUser, pause, context, key, handledInputs, refXHRctx, refXHRcert⟩
pub mod slot {
    pub const Q: usize = 1;
    pub const PARENT_ORIGIN: usize = 2;
    pub const LOGGED_IN_USER: usize = 3;
    pub const PAUSE: usize = 4;
    pub const CONTEXT: usize = 5;
    pub const KEY: usize = 6;
    pub const HANDLED: usize = 7;
    pub const REF_CTX: usize = 8;
    pub const REF_CERT: usize = 9;
}

pub fn initial_state() -> Term {
    Term::seq(vec![
        Term::lit("init"),
        Term::Bot,
        Term::Bot,
        Term::Bot,
        Term::Bot,
        Term::Bot,
        Term::empty(),
        Term::Bot,
        Term::Bot,
    ])
}

pub fn run(io: &ScriptInput<'_>, nonces: &mut NonceSource, oracle: &mut Oracle<'_>, world: &World) -> Result<Term, OracleError> {
    let s = io.state;
    let q = s.proj(slot::Q);
    let goto = |state: &Term, q: &'static str| state.with_item(slot::Q, Term::lit(q));
    let parent = tree::parent_window(io.tree, io.docnonce);
    let Some(q) = q.as_str() else { return Ok(io.unchanged()) };
    match q {
        "init" => {
            let msg = tagged(pm::CIFREADY, Term::empty());
            Ok(io.emit(goto(s, "default"), postmessage(parent, msg, Term::Bot)))
        }
        "default" => {
            let (input, s1) = choose_input(s, slot::HANDLED, io.inputs, oracle)?;
            let Some((sender, origin, message)) = as_postmessage(&input) else { return Ok(io.emit(s1, Term::empty())) };
            if *sender != parent {
                return Ok(io.emit(s1, Term::empty()));
            }
            let (tag, body) = (message.proj(1), message.proj(2));
            let s2 = if tag == pm::LOADED {
                goto(&s1.with_item(slot::PARENT_ORIGIN, origin.clone()).with_item(slot::LOGGED_IN_USER, body), "fetchContext")
            } else if tag == pm::DLG_RUN {
                s1.with_item(slot::PAUSE, Term::Top)
            } else if tag == pm::DLG_CMPLT {
                goto(&s1.with_item(slot::PAUSE, Term::Bot), "fetchContext")
            } else if tag == pm::LOGGED_IN_USER {
                s1.with_item(slot::LOGGED_IN_USER, body)
            } else {
                // `logout` and unknown tags only consume the input.
                s1
            };
            Ok(io.emit(s2, Term::empty()))
        }
        "fetchContext" => {
            let r = nonces.fresh();
            let cmd = xhr(lpo_url(&world.lpo_domain, path::CTX), tok::GET, Term::empty(), r.clone());
            Ok(io.emit(goto(&s.with_item(slot::REF_CTX, r), "receiveContext"), cmd))
        }
        "receiveContext" => match take_xhr(s, slot::HANDLED, io.inputs, &s.proj(slot::REF_CTX)) {
            Some((ctx, s1)) => Ok(io.emit(goto(&s1.with_item(slot::CONTEXT, ctx), "checkAndEmit"), Term::empty())),
            None => Ok(io.unchanged()),
        },
        "checkAndEmit" => {
            if s.proj(slot::PAUSE) == Term::Top {
                return Ok(io.emit(goto(s, "default"), Term::empty()));
            }
            let ids = s.proj(slot::CONTEXT).proj(1);
            let user = s.proj(slot::LOGGED_IN_USER);
            let remembered = dict_get(&dict_get(io.local_storage, &SITE_INFO), &s.proj(slot::PARENT_ORIGIN));
            if !matches!(user, Term::Bot) && !user.is_empty_seq() && !elem_of(&user, &ids) {
                let msg = tagged(pm::LOGOUT, Term::empty());
                return Ok(io.emit(goto(s, "default"), postmessage(parent, msg, s.proj(slot::PARENT_ORIGIN))));
            }
            if elem_of(&remembered, &ids) && remembered != user {
                let key = nonces.fresh();
                let r = nonces.fresh();
                let body = Term::seq(vec![remembered.clone(), Term::pub_key(key.clone()), s.proj(slot::CONTEXT).proj(2)]);
                let cmd = xhr(lpo_url(&world.lpo_domain, path::CERTREQ), tok::POST, body, r.clone());
                let s1 = s.with_item(slot::KEY, key).with_item(slot::REF_CERT, r).with_item(slot::LOGGED_IN_USER, remembered);
                return Ok(io.emit(goto(&s1, "receiveUC"), cmd));
            }
            Ok(io.emit(goto(s, "default"), Term::empty()))
        }
        "receiveUC" => match take_xhr(s, slot::HANDLED, io.inputs, &s.proj(slot::REF_CERT)) {
            Some((uc, s1)) => {
                let origin = s.proj(slot::PARENT_ORIGIN);
                let key = s.proj(slot::KEY);
                let cap = super::cap(uc.clone(), super::ia(origin.clone(), key.clone()));
                let cmd = postmessage(parent, tagged(pm::LOGIN, cap), origin);
                let local = if world.fixes.local_storage_cleanup { io.local_storage.clone() } else { persist_key_pair(io.local_storage, &key, &uc) };
                Ok(io.emit_with(goto(&s1, "default"), local, cmd))
            }
            None => Ok(io.unchanged()),
        },
        _ => Ok(io.unchanged()),
    }
}
