//! Window and document trees, cookie-store updates and the cleaned tree handed to scripts.

use crate::netmodel::{self, field};
use crate::terms::Term;
use alloc::vec;
use alloc::vec::Vec;

/// Path to a window: top-level index, then subwindow indices through active documents.
pub type WinPtr = Vec<usize>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window {
    pub nonce: Term,
    pub documents: Vec<Document>,
    /// Nonce of the opening window, ⊥ for none.
    pub opener: Term,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub nonce: Term,
    pub origin: Term,
    pub script: Term,
    pub scriptstate: Term,
    pub scriptinput: Vec<Term>,
    pub subwindows: Vec<Window>,
    pub active: bool,
}

impl Window {
    pub fn active_index(&self) -> Option<usize> {
        self.documents.iter().position(|d| d.active)
    }

    pub fn active_doc(&self) -> Option<&Document> {
        self.documents.iter().find(|d| d.active)
    }

    pub fn active_doc_mut(&mut self) -> Option<&mut Document> {
        self.documents.iter_mut().find(|d| d.active)
    }

    pub fn to_term(&self) -> Term {
        Term::seq(vec![
            self.nonce.clone(),
            Term::seq(self.documents.iter().map(Document::to_term).collect()),
            self.opener.clone(),
        ])
    }
}

impl Document {
    pub fn to_term(&self) -> Term {
        Term::seq(vec![
            self.nonce.clone(),
            self.origin.clone(),
            self.script.clone(),
            self.scriptstate.clone(),
            Term::seq(self.scriptinput.clone()),
            Term::seq(self.subwindows.iter().map(Window::to_term).collect()),
            Term::truth(self.active),
        ])
    }
}

pub(super) fn collect(w: &Window, ptr: WinPtr, out: &mut Vec<WinPtr>) {
    out.push(ptr.clone());
    if let Some(d) = w.active_doc() {
        for (i, sub) in d.subwindows.iter().enumerate() {
            let mut p = ptr.clone();
            p.push(i);
            collect(sub, p, out);
        }
    }
}

/// Window forest without inactive documents; foreign-origin documents become ⟨nonce, subwindows⟩.
pub fn clean(windows: &[Window], origin: &Term) -> Term {
    Term::seq(windows.iter().map(|w| clean_window(w, origin)).collect())
}

fn clean_window(w: &Window, origin: &Term) -> Term {
    let docs = w
        .documents
        .iter()
        .filter(|d| d.active)
        .map(|d| {
            let subs = Term::seq(d.subwindows.iter().map(|s| clean_window(s, origin)).collect());
            if d.origin == *origin {
                Term::seq(vec![
                    d.nonce.clone(),
                    d.origin.clone(),
                    d.script.clone(),
                    d.scriptstate.clone(),
                    Term::seq(d.scriptinput.clone()),
                    subs,
                    Term::Top,
                ])
            } else {
                Term::pair(d.nonce.clone(), subs)
            }
        })
        .collect();
    Term::seq(vec![w.nonce.clone(), Term::seq(docs), w.opener.clone()])
}

fn name(c: &Term) -> Option<&Term> {
    c.at(field::cookie::NAME)
}

/// Merges script-written cookies into a store; httpOnly cookies can neither be set nor replaced.
pub fn cookie_merge(old: &[Term], new: &[Term]) -> Vec<Term> {
    let candidates: Vec<&Term> = new.iter().filter(|c| netmodel::is_cookie(c) && !netmodel::cookie_flag(c, field::cookie::HTTP_ONLY)).collect();
    // Rightmost cookie per name wins.
    let mut fresh: Vec<&Term> = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        if !candidates[i + 1..].iter().any(|later| name(later) == name(c)) {
            fresh.push(c);
        }
    }
    let mut out: Vec<Term> = Vec::with_capacity(old.len() + fresh.len());
    for o in old {
        match fresh.iter().find(|c| name(c) == name(o)) {
            Some(c) if !netmodel::cookie_flag(o, field::cookie::HTTP_ONLY) => out.push((*c).clone()),
            _ => out.push(o.clone()),
        }
    }
    for c in fresh {
        if !old.iter().any(|o| name(o) == name(c)) {
            out.push(c.clone());
        }
    }
    out
}

/// Replaces any same-name cookie, then appends.
pub fn add_cookie(old: &[Term], c: Term) -> Vec<Term> {
    let mut out: Vec<Term> = old.iter().filter(|o| name(o) != name(&c)).cloned().collect();
    out.push(c);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::cookie;

    fn c(n: &'static str, v: &'static str, http_only: bool) -> Term {
        cookie(Term::lit(n), Term::lit(v), false, false, http_only)
    }

    #[test]
    fn merge_drops_http_only_and_keeps_rightmost() {
        let merged = cookie_merge(&[], &[c("a", "1", false), c("b", "x", true), c("a", "2", false)]);
        assert_eq!(merged, vec![c("a", "2", false)]);
    }

    #[test]
    fn merge_cannot_replace_http_only_cookie() {
        let old = vec![c("sid", "old", true), c("pref", "old", false)];
        let merged = cookie_merge(&old, &[c("sid", "new", false), c("pref", "new", false)]);
        assert_eq!(merged, vec![c("sid", "old", true), c("pref", "new", false)]);
    }

    #[test]
    fn merge_of_disjoint_names_is_union() {
        assert_eq!(cookie_merge(&[c("a", "1", false)], &[c("b", "2", false)]), vec![c("a", "1", false), c("b", "2", false)]);
    }

    #[test]
    fn add_cookie_overwrites_same_name() {
        assert_eq!(add_cookie(&[], c("a", "1", true)), vec![c("a", "1", true)]);
        assert_eq!(add_cookie(&[c("a", "1", true), c("b", "1", false)], c("a", "2", false)), vec![c("b", "1", false), c("a", "2", false)]);
    }

    fn doc(nonce: Term, origin: Term, active: bool, subwindows: Vec<Window>) -> Document {
        Document { nonce, origin, script: Term::lit("s"), scriptstate: Term::empty(), scriptinput: vec![], subwindows, active }
    }

    #[test]
    fn clean_limits_foreign_documents_and_drops_inactive_ones() {
        let own = netmodel::origin(Term::lit("a.com"), crate::terms::tok::S);
        let other = netmodel::origin(Term::lit("b.com"), crate::terms::tok::S);
        let frame = Window { nonce: Term::nonce("b", 3), documents: vec![doc(Term::nonce("b", 4), other, true, vec![])], opener: Term::Bot };
        let top = Window {
            nonce: Term::nonce("b", 0),
            documents: vec![doc(Term::nonce("b", 1), own.clone(), false, vec![]), doc(Term::nonce("b", 2), own.clone(), true, vec![frame])],
            opener: Term::Bot,
        };
        let tree = clean(&[top], &own);
        let docs = crate::terms::deref(&tree, &[1, 2]);
        assert_eq!(docs.seq_len(), Some(1));
        let limited = crate::terms::deref(&tree, &[1, 2, 1, 6, 1, 2, 1]);
        assert_eq!(limited, Term::pair(Term::nonce("b", 4), Term::empty()));
    }
}
