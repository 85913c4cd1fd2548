//! The LPO login dialog: authenticates the user and returns a CAP to its opener.

use super::{as_postmessage, lpo_url, path, persist_key_pair, pm, postmessage, tagged, take_xhr, xhr};
use crate::oracle::{Oracle, OracleError};
use crate::runtime::World;
use crate::scripts::{choose_input, tree, NonceSource, ScriptInput};
use crate::terms::{tok, Term};
use alloc::vec;

/// ⟨q, requestOrigin, context, key, handledInputs, refXHRctx, refXHRauth, refXHRcert⟩
pub mod slot {
    pub const Q: usize = 1;
    pub const REQUEST_ORIGIN: usize = 2;
    pub const CONTEXT: usize = 3;
    pub const KEY: usize = 4;
    pub const HANDLED: usize = 5;
    pub const REF_CTX: usize = 6;
    pub const REF_AUTH: usize = 7;
    pub const REF_CERT: usize = 8;
}

pub fn initial_state() -> Term {
    Term::seq(vec![Term::lit("init"), Term::Bot, Term::Bot, Term::Bot, Term::empty(), Term::Bot, Term::Bot, Term::Bot])
}

fn fetch_context(io: &ScriptInput<'_>, s: &Term, nonces: &mut NonceSource, world: &World) -> Term {
    let r = nonces.fresh();
    let cmd = xhr(lpo_url(&world.lpo_domain, path::CTX), tok::GET, Term::empty(), r.clone());
    io.emit(s.with_item(slot::REF_CTX, r).with_item(slot::Q, Term::lit("receiveContext")), cmd)
}

pub fn run(io: &ScriptInput<'_>, nonces: &mut NonceSource, oracle: &mut Oracle<'_>, world: &World) -> Result<Term, OracleError> {
    let s = io.state;
    let goto = |state: &Term, q: &'static str| state.with_item(slot::Q, Term::lit(q));
    let opener = tree::opener_window(io.tree, io.docnonce);
    let Some(q) = s.proj(slot::Q).as_str().map(alloc::string::String::from) else { return Ok(io.unchanged()) };
    match q.as_str() {
        "init" => Ok(io.emit(goto(s, "start"), postmessage(opener, tagged(pm::LDREADY, Term::empty()), Term::Bot))),
        "start" => {
            let (input, s1) = choose_input(s, slot::HANDLED, io.inputs, oracle)?;
            match as_postmessage(&input) {
                Some((sender, origin, message)) if *sender == opener && super::has_tag(message, &pm::REQUEST) => {
                    Ok(fetch_context(io, &s1.with_item(slot::REQUEST_ORIGIN, origin.clone()), nonces, world))
                }
                _ => Ok(io.emit(s1, Term::empty())),
            }
        }
        "receiveContext" => match take_xhr(s, slot::HANDLED, io.inputs, &s.proj(slot::REF_CTX)) {
            Some((ctx, s1)) => {
                let next = if ctx.proj(1).is_empty_seq() { "requestAuth" } else { "requestUC" };
                Ok(io.emit(goto(&s1.with_item(slot::CONTEXT, ctx), next), Term::empty()))
            }
            None => Ok(io.unchanged()),
        },
        "requestAuth" => {
            let r = nonces.fresh();
            let body = Term::pair(io.secret.clone(), s.proj(slot::CONTEXT).proj(2));
            let cmd = xhr(lpo_url(&world.lpo_domain, path::AUTH), tok::POST, body, r.clone());
            Ok(io.emit(goto(&s.with_item(slot::REF_AUTH, r), "receiveAuth"), cmd))
        }
        "receiveAuth" => match take_xhr(s, slot::HANDLED, io.inputs, &s.proj(slot::REF_AUTH)) {
            Some((Term::Top, s1)) => Ok(fetch_context(io, &s1, nonces, world)),
            Some((_, s1)) => Ok(io.emit(goto(&s1, "null"), Term::empty())),
            None => Ok(io.unchanged()),
        },
        "requestUC" => {
            let ctx = s.proj(slot::CONTEXT);
            let ids = ctx.proj(1);
            let id = ids.items()[oracle.choose("ld.requestuc.id", ids.items())?].clone();
            let key = nonces.fresh();
            let r = nonces.fresh();
            let body = Term::seq(vec![id, Term::pub_key(key.clone()), ctx.proj(2)]);
            let cmd = xhr(lpo_url(&world.lpo_domain, path::CERTREQ), tok::POST, body, r.clone());
            Ok(io.emit(goto(&s.with_item(slot::KEY, key).with_item(slot::REF_CERT, r), "receiveUC"), cmd))
        }
        "receiveUC" => match take_xhr(s, slot::HANDLED, io.inputs, &s.proj(slot::REF_CERT)) {
            Some((uc, s1)) => {
                let origin = s.proj(slot::REQUEST_ORIGIN);
                let key = s.proj(slot::KEY);
                let cap = super::cap(uc.clone(), super::ia(origin.clone(), key.clone()));
                let cmd = postmessage(opener, tagged(pm::RESPONSE, cap), origin);
                let local = if world.fixes.local_storage_cleanup { io.local_storage.clone() } else { persist_key_pair(io.local_storage, &key, &uc) };
                Ok(io.emit_with(goto(&s1, "null"), local, cmd))
            }
            None => Ok(io.unchanged()),
        },
        _ => Ok(io.unchanged()),
    }
}
