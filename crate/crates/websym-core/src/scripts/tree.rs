//! Queries over the cleaned window tree a script receives.
//!
//! Windows are ⟨nonce, documents, opener⟩; documents are either full seven-tuples or
//! limited ⟨nonce, subwindows⟩ pairs.

use crate::oracle::{Oracle, OracleError};
use crate::terms::Term;
use alloc::vec::Vec;

fn subwindows_of(doc: &Term) -> &[Term] {
    match doc.items().len() {
        7 => doc.items()[5].items(),
        2 => doc.items()[1].items(),
        _ => &[],
    }
}

/// Visits every (window, parent window, document) triple in preorder; stops when `f` returns true.
fn walk<'a>(windows: &'a [Term], parent: Option<&'a Term>, f: &mut impl FnMut(&'a Term, Option<&'a Term>, &'a Term) -> bool) -> bool {
    for w in windows {
        for d in w.proj_ref(2).items() {
            if f(w, parent, d) || walk(subwindows_of(d), Some(w), f) {
                return true;
            }
        }
    }
    false
}

fn find_doc<'a>(tree: &'a Term, docnonce: &Term) -> Option<(&'a Term, Option<&'a Term>, &'a Term)> {
    let mut found = None;
    walk(tree.items(), None, &mut |w, p, d| {
        if d.at(1) == Some(docnonce) {
            found = Some((w, p, d));
            true
        } else {
            false
        }
    });
    found
}

fn all_windows(windows: &[Term], out: &mut Vec<Term>) {
    for w in windows {
        out.push(w.clone());
        for d in w.proj_ref(2).items() {
            all_windows(subwindows_of(d), out);
        }
    }
}

trait ProjRef {
    fn proj_ref(&self, i: usize) -> &Term;
}

impl ProjRef for Term {
    fn proj_ref(&self, i: usize) -> &Term {
        const UNDEF: &Term = &Term::Undef;
        self.at(i).unwrap_or(UNDEF)
    }
}

/// Nonce of the window directly containing the document's window, ⊥ for top-level documents.
pub fn parent_window(tree: &Term, docnonce: &Term) -> Term {
    match find_doc(tree, docnonce) {
        Some((_, Some(p), _)) => p.proj(1),
        _ => Term::Bot,
    }
}

pub fn subwindows(tree: &Term, docnonce: &Term) -> Term {
    match find_doc(tree, docnonce) {
        Some((_, _, d)) if d.items().len() == 7 => d.proj(6),
        _ => Term::empty(),
    }
}

pub fn opener_window(tree: &Term, docnonce: &Term) -> Term {
    find_doc(tree, docnonce).map(|(w, _, _)| w.proj(3)).unwrap_or(Term::Undef)
}

pub fn get_window(tree: &Term, docnonce: &Term) -> Term {
    find_doc(tree, docnonce).map(|(w, _, _)| w.proj(1)).unwrap_or(Term::Undef)
}

pub fn get_origin(tree: &Term, docnonce: &Term) -> Term {
    match find_doc(tree, docnonce) {
        Some((_, _, d)) if d.items().len() == 7 => d.proj(2),
        _ => Term::Undef,
    }
}

/// Oracle-chosen window opened by the document's window, else that window itself.
pub fn aux_window(tree: &Term, docnonce: &Term, oracle: &mut Oracle<'_>) -> Result<Term, OracleError> {
    let own = get_window(tree, docnonce);
    let mut windows = Vec::new();
    all_windows(tree.items(), &mut windows);
    let opened: Vec<Term> = windows.iter().filter(|w| w.proj(3) == own).map(|w| w.proj(1)).collect();
    if opened.is_empty() {
        return Ok(own);
    }
    let i = oracle.choose("script.auxwindow", &opened)?;
    Ok(opened[i].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::GuidedDecider;
    use crate::terms::parse;

    /// Top window #b.0 with doc #b.1 holding iframe #b.2 (doc #b.3, foreign), plus popup #b.4 opened by #b.0.
    fn tree() -> Term {
        parse(
            r#"(seq
                (seq #b.0 (seq (seq #b.1 (seq "rp.com" "S") "s" @bot (seq) (seq (seq #b.2 (seq (seq #b.3 (seq))) @bot)) @top)) @bot)
                (seq #b.4 (seq (seq #b.5 (seq))) #b.0))"#,
        )
        .unwrap()
    }

    #[test]
    fn parent_of_top_level_document_is_bot() {
        assert_eq!(parent_window(&tree(), &Term::nonce("b", 1)), Term::Bot);
        assert_eq!(parent_window(&tree(), &Term::nonce("b", 3)), Term::nonce("b", 0));
    }

    #[test]
    fn unknown_document_yields_undefined() {
        assert_eq!(get_origin(&tree(), &Term::nonce("b", 9)), Term::Undef);
        assert_eq!(opener_window(&tree(), &Term::nonce("b", 9)), Term::Undef);
        assert_eq!(subwindows(&tree(), &Term::nonce("b", 9)), Term::empty());
    }

    #[test]
    fn origin_window_and_subwindows_of_full_document() {
        let t = tree();
        let d = Term::nonce("b", 1);
        assert_eq!(get_origin(&t, &d), parse(r#"(seq "rp.com" "S")"#).unwrap());
        assert_eq!(get_window(&t, &d), Term::nonce("b", 0));
        assert_eq!(subwindows(&t, &d).seq_len(), Some(1));
        assert_eq!(opener_window(&t, &Term::nonce("b", 5)), Term::nonce("b", 0));
    }

    #[test]
    fn aux_window_finds_opened_popup_or_falls_back() {
        let mut g = GuidedDecider::new(alloc::vec![]);
        let mut o = Oracle::new(&mut g);
        assert_eq!(aux_window(&tree(), &Term::nonce("b", 1), &mut o).unwrap(), Term::nonce("b", 4));
        assert_eq!(aux_window(&tree(), &Term::nonce("b", 5), &mut o).unwrap(), Term::nonce("b", 4));
        assert_eq!(aux_window(&tree(), &Term::nonce("b", 3), &mut o).unwrap(), Term::nonce("b", 2));
    }
}
