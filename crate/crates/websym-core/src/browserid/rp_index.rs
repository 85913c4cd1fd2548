//! The RP's index page: embeds the CIF, opens the LD and redeems the CAP at its server.

use super::{as_postmessage, has_tag, lpo_origin, lpo_url, path, pm, postmessage, tagged, take_xhr, xhr};
use crate::netmodel::{self, field};
use crate::oracle::{Oracle, OracleError};
use crate::runtime::World;
use crate::scripts::{choose_input, tree, NonceSource, ScriptInput};
use crate::terms::{tok, Term};
use alloc::vec;

/// ⟨q, CIFindex, LDindex, dialogRunning, cap, handledInputs, refXHRcap⟩
pub mod slot {
    pub const Q: usize = 1;
    pub const CIF_INDEX: usize = 2;
    pub const LD_INDEX: usize = 3;
    pub const DIALOG_RUNNING: usize = 4;
    pub const CAP: usize = 5;
    pub const HANDLED: usize = 6;
    pub const REF_CAP: usize = 7;
}

pub fn initial_state() -> Term {
    Term::seq(vec![Term::lit("init"), Term::Bot, Term::Bot, Term::Bot, Term::empty(), Term::empty(), Term::Bot])
}

fn cif_window(io: &ScriptInput<'_>, s: &Term) -> Term {
    let idx = s.proj(slot::CIF_INDEX).as_nat().unwrap_or(0);
    tree::subwindows(io.tree, io.docnonce).proj(idx).proj(1)
}

pub fn run(io: &ScriptInput<'_>, nonces: &mut NonceSource, oracle: &mut Oracle<'_>, world: &World) -> Result<Term, OracleError> {
    let s = io.state;
    let goto = |state: &Term, q: &'static str| state.with_item(slot::Q, Term::lit(q));
    let lpo = lpo_origin(&world.lpo_domain);
    let Some(q) = s.proj(slot::Q).as_str().map(alloc::string::String::from) else { return Ok(io.unchanged()) };
    match q.as_str() {
        "init" => {
            let own = tree::get_window(io.tree, io.docnonce);
            let index = tree::subwindows(io.tree, io.docnonce).items().len() + 1;
            let cmd = Term::seq(vec![tok::IFRAME, lpo_url(&world.lpo_domain, path::CIF), own]);
            Ok(io.emit(goto(&s.with_item(slot::CIF_INDEX, Term::nat(index)), "receiveCIFReady"), cmd))
        }
        "receiveCIFReady" => {
            let (input, s1) = choose_input(s, slot::HANDLED, io.inputs, oracle)?;
            match as_postmessage(&input) {
                Some((sender, origin, message)) if has_tag(message, &pm::CIFREADY) && *origin == lpo && *sender == cif_window(io, s) => {
                    let mut ids = vec![Term::Bot, Term::empty()];
                    ids.extend(world.identities.iter().map(|i| i.id.clone()));
                    let id = ids[oracle.choose("rp_index.loaded.id", &ids)?].clone();
                    let cmd = postmessage(cif_window(io, s), tagged(pm::LOADED, id), lpo);
                    Ok(io.emit(goto(&s1, "default"), cmd))
                }
                _ => Ok(io.emit(s1, Term::empty())),
            }
        }
        "default" => {
            let options = [Term::lit("openLD"), Term::lit("handlePM")];
            if oracle.choose("rp_index.default.choice", &options)? == 0 {
                let cmd = Term::seq(vec![tok::HREF, lpo_url(&world.lpo_domain, path::LD), tok::BLANK]);
                return Ok(io.emit(s.with_item(slot::DIALOG_RUNNING, Term::Top), cmd));
            }
            let (input, s1) = choose_input(s, slot::HANDLED, io.inputs, oracle)?;
            let Some((sender, origin, message)) = as_postmessage(&input) else { return Ok(io.emit(s1, Term::empty())) };
            let from_cif = *origin == lpo && *sender == cif_window(io, s);
            let dialog = s.proj(slot::DIALOG_RUNNING) == Term::Top;
            let checked = world.fixes.pm_origin_check;
            if has_tag(message, &pm::LOGIN) && (from_cif || !checked) {
                return Ok(io.emit(goto(&s1.with_item(slot::CAP, message.proj(2)), "sendCAP"), Term::empty()));
            }
            if has_tag(message, &pm::LOGOUT) && from_cif {
                return Ok(io.emit(s1.with_item(slot::CAP, Term::empty()), Term::empty()));
            }
            if has_tag(message, &pm::LDREADY) && *origin == lpo && dialog {
                let aux = tree::aux_window(io.tree, io.docnonce, oracle)?;
                return Ok(io.emit(s1, postmessage(aux, tagged(pm::REQUEST, Term::empty()), lpo)));
            }
            if has_tag(message, &pm::RESPONSE) && dialog && (*origin == lpo || !checked) {
                let aux = tree::aux_window(io.tree, io.docnonce, oracle)?;
                let s2 = s1.with_item(slot::CAP, message.proj(2)).with_item(slot::DIALOG_RUNNING, Term::Bot);
                return Ok(io.emit(goto(&s2, "dlgClosed"), Term::seq(vec![tok::CLOSE, aux])));
            }
            Ok(io.emit(s1, Term::empty()))
        }
        "dlgClosed" => {
            let id = super::uc_id(&s.proj(slot::CAP).proj(1));
            Ok(io.emit(goto(s, "loggedInUser"), postmessage(cif_window(io, s), tagged(pm::LOGGED_IN_USER, id), lpo)))
        }
        "loggedInUser" => Ok(io.emit(goto(s, "sendCAP"), postmessage(cif_window(io, s), tagged(pm::DLG_CMPLT, Term::empty()), lpo))),
        "sendCAP" => {
            let own = tree::get_origin(io.tree, io.docnonce);
            let url = netmodel::url(own.proj(field::origin::PROTOCOL), own.proj(field::origin::HOST), path::ROOT, Term::empty());
            let r = nonces.fresh();
            let cmd = xhr(url, tok::POST, s.proj(slot::CAP), r.clone());
            Ok(io.emit(goto(&s.with_item(slot::REF_CAP, r), "receiveServiceToken"), cmd))
        }
        "receiveServiceToken" => match take_xhr(s, slot::HANDLED, io.inputs, &s.proj(slot::REF_CAP)) {
            Some((_, s1)) => Ok(io.emit(goto(&s1, "loggedIn"), Term::empty())),
            None => Ok(io.unchanged()),
        },
        _ => Ok(io.unchanged()),
    }
}
