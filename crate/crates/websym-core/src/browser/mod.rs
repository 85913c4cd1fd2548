//! Web browser process: window tree, cookies, storage, STS, pending queues and corruption.

mod tree;

pub use tree::{add_cookie, cookie_merge, Document, WinPtr, Window};

use crate::derive::NoncePool;
use crate::netmodel::{self, field, HttpRequest};
use crate::oracle::{Goal, Oracle, OracleError, RecipeContext};
use crate::runtime::{Emission, Note, World};
use crate::scripts::{self, NonceSource};
use crate::terms::{dict_get, dict_keys, dict_put, dict_remove, tok, Nonce, Term, Text};
use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

/// Corruption status; transitions only away from `Honest`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corruption {
    Honest,
    Full,
    Close,
}

impl Corruption {
    pub fn to_term(self) -> Term {
        match self {
            Corruption::Honest => Term::Bot,
            Corruption::Full => tok::FULLCORRUPT,
            Corruption::Close => tok::CLOSECORRUPT,
        }
    }
}

/// A pending request awaiting its response.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pending {
    pub reference: Term,
    pub request: HttpRequest,
    /// Symmetric key for HTTPS, ⊥ for plain HTTP.
    pub key: Term,
    pub server: Term,
}

impl Pending {
    fn to_term(&self) -> Term {
        Term::seq(vec![self.reference.clone(), self.request.to_term(), self.key.clone(), self.server.clone()])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BrowserState {
    pub owner: Text,
    pub address: Term,
    pub windows: Vec<Window>,
    /// Origin → secret.
    pub secrets: Term,
    /// Domain → cookie sequence.
    pub cookies: Term,
    pub local_storage: Term,
    /// ⟨origin, top-level window nonce⟩ → term.
    pub session_storage: Term,
    pub key_mapping: Term,
    pub sts: Vec<Term>,
    pub dns_address: Term,
    /// Used nonces in the order they were taken.
    pub nonces: Vec<Term>,
    /// Next unused nonce index; every index below it is taken.
    pub next_nonce: u64,
    /// Nonce → ⟨reference, request, protocol⟩.
    pub pending_dns: Term,
    pub pending_requests: Vec<Pending>,
    /// Messages collected while corrupted, oldest first.
    pub collected: Vec<Term>,
    pub corruption: Corruption,
}

/// Result of one browser step: `Keep` mirrors "stop {}, s".
pub enum Next {
    Keep,
    Update(Vec<Emission>),
}

impl BrowserState {
    pub fn new(owner: impl Into<Text>, address: Term, dns_address: Term, key_mapping: Term, secrets: Term, sts: Vec<Term>) -> Self {
        BrowserState {
            owner: owner.into(),
            address,
            windows: Vec::new(),
            secrets,
            cookies: Term::empty(),
            local_storage: Term::empty(),
            session_storage: Term::empty(),
            key_mapping,
            sts,
            dns_address,
            nonces: Vec::new(),
            next_nonce: 0,
            pending_dns: Term::empty(),
            pending_requests: Vec::new(),
            collected: Vec::new(),
            corruption: Corruption::Honest,
        }
    }

    /// The twelve-component state term; collected messages nest over pendingRequests.
    pub fn to_term(&self) -> Term {
        let mut pending = Term::seq(self.pending_requests.iter().map(Pending::to_term).collect());
        for m in &self.collected {
            pending = Term::pair(m.clone(), pending);
        }
        Term::seq(vec![
            Term::seq(self.windows.iter().map(Window::to_term).collect()),
            self.secrets.clone(),
            self.cookies.clone(),
            self.local_storage.clone(),
            self.session_storage.clone(),
            self.key_mapping.clone(),
            Term::seq(self.sts.clone()),
            self.dns_address.clone(),
            Term::seq(self.nonces.clone()),
            self.pending_dns.clone(),
            pending,
            self.corruption.to_term(),
        ])
    }

    pub fn take_nonce(&mut self) -> Term {
        let n = Term::nonce(self.owner.clone(), self.next_nonce);
        self.next_nonce += 1;
        self.nonces.push(n.clone());
        n
    }

    fn used_indices(&self) -> BTreeSet<u64> {
        self.nonces.iter().filter_map(|n| n.as_nonce()).filter(|n| n.owner == self.owner).map(|n| n.index).collect()
    }

    /// Records nonces of this browser that occur in `t` and are not yet marked used.
    fn mark_used(&mut self, t: &Term) {
        let mut fresh: Vec<Nonce> = t.nonces().into_iter().filter(|n| n.owner == self.owner).collect();
        fresh.sort();
        for n in fresh {
            let term = Term::Nonce(n.clone());
            if !self.nonces.contains(&term) {
                self.nonces.push(term);
            }
            self.next_nonce = self.next_nonce.max(n.index + 1);
        }
    }

    // ---- window tree ----

    pub fn window(&self, p: &[usize]) -> Option<&Window> {
        let (first, rest) = p.split_first()?;
        let mut w = self.windows.get(*first)?;
        for &i in rest {
            w = w.active_doc()?.subwindows.get(i)?;
        }
        Some(w)
    }

    pub fn window_mut(&mut self, p: &[usize]) -> Option<&mut Window> {
        let (first, rest) = p.split_first()?;
        let mut w = self.windows.get_mut(*first)?;
        for &i in rest {
            w = w.active_doc_mut()?.subwindows.get_mut(i)?;
        }
        Some(w)
    }

    /// Pointers to all windows reachable through active documents, in preorder.
    pub fn subwindows(&self) -> Vec<WinPtr> {
        let mut out = Vec::new();
        for (i, w) in self.windows.iter().enumerate() {
            tree::collect(w, vec![i], &mut out);
        }
        out
    }

    fn find_window(&self, nonce: &Term) -> Option<WinPtr> {
        self.subwindows().into_iter().find(|p| self.window(p).is_some_and(|w| w.nonce == *nonce))
    }

    fn active_origin(&self, p: &[usize]) -> Term {
        self.window(p).and_then(Window::active_doc).map(|d| d.origin.clone()).unwrap_or(Term::Undef)
    }

    /// Windows the active document of `w` may navigate.
    pub fn navigable_windows(&self, w: &[usize]) -> Vec<WinPtr> {
        let all = self.subwindows();
        let own = self.active_origin(w);
        let mut set: Vec<WinPtr> = Vec::new();
        for p in &all {
            let same_origin = self.active_origin(p) == own;
            let top_ancestor = p.len() == 1 && w.len() > 1 && w.starts_with(p);
            let ancestor_same_origin = p.len() > 1 && all.iter().any(|q| q.len() < p.len() && p.starts_with(q) && self.active_origin(q) == own);
            if same_origin || top_ancestor || ancestor_same_origin {
                set.push(p.clone());
            }
        }
        // Auxiliary windows whose opener is navigable, to a fixpoint.
        loop {
            let mut grew = false;
            for p in &all {
                if set.contains(p) || p.len() != 1 {
                    continue;
                }
                let opener = &self.windows[p[0]].opener;
                if *opener != Term::Bot && set.iter().any(|q| self.window(q).is_some_and(|x| x.nonce == *opener)) {
                    set.push(p.clone());
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        set.sort();
        set
    }

    /// Window a navigation command actually targets; `_BLANK` opens a fresh auxiliary window.
    pub fn get_navigable_window(&mut self, w: &[usize], target: &Term) -> WinPtr {
        if *target == tok::BLANK {
            let n = self.take_nonce();
            let opener = self.window(w).map(|x| x.nonce.clone()).unwrap_or(Term::Bot);
            self.windows.push(Window { nonce: n, documents: Vec::new(), opener });
            return vec![self.windows.len() - 1];
        }
        self.navigable_windows(w)
            .into_iter()
            .find(|p| self.window(p).is_some_and(|x| x.nonce == *target))
            .unwrap_or_else(|| w.to_vec())
    }

    /// Same-origin window lookup; falls back to the caller's own window.
    pub fn get_window(&self, w: &[usize], target: &Term) -> WinPtr {
        match self.find_window(target) {
            Some(p) if self.active_origin(&p) == self.active_origin(w) => p,
            _ => w.to_vec(),
        }
    }

    /// Drops pending requests and DNS lookups for the given window reference.
    pub fn cancel_nav(&mut self, reference: &Term) {
        self.pending_requests.retain(|p| p.reference != *reference);
        let keep: Vec<Term> = self.pending_dns.items().iter().filter(|kv| kv.at(2).and_then(|v| v.at(1)) != Some(reference)).cloned().collect();
        self.pending_dns = Term::seq(keep);
    }

    /// Adds headers, takes a nonce for the DNS lookup and parks the request.
    pub fn send(&mut self, reference: Term, mut message: HttpRequest, mut protocol: Term, origin: Term, notes: &mut Vec<Note>) -> Vec<Emission> {
        if self.sts.contains(&message.host) {
            protocol = tok::S;
        }
        let host_cookies = dict_get(&self.cookies, &message.host);
        let visible: Vec<Term> = host_cookies
            .items()
            .iter()
            .filter(|c| !netmodel::cookie_flag(c, field::cookie::SECURE) || protocol == tok::S)
            .filter_map(|c| Some(Term::pair(c.at(field::cookie::NAME)?.clone(), netmodel::cookie_value(c))))
            .collect();
        let cookie_header = Term::seq(visible);
        message.headers = dict_put(&message.headers, tok::COOKIE, cookie_header.clone());
        if origin != Term::Bot {
            message.headers = dict_put(&message.headers, tok::ORIGIN, origin);
        }
        notes.push(Note::RequestPrepared {
            browser: self.owner.clone(),
            host: message.host.clone(),
            protocol: protocol.clone(),
            cookie_header,
            host_cookies,
        });
        let n = self.take_nonce();
        let host = message.host.clone();
        self.pending_dns = dict_put(&self.pending_dns, n.clone(), Term::seq(vec![reference, message.to_term(), protocol]));
        vec![Emission { receiver: self.dns_address.clone(), sender: self.address.clone(), payload: netmodel::dns_request(host, n) }]
    }

    fn top_level_nonce(&self, w: &[usize]) -> Term {
        self.windows.get(w[0]).map(|x| x.nonce.clone()).unwrap_or(Term::Undef)
    }

    /// Runs the script of the active document in window `w`.
    pub fn run_script(&mut self, w: &[usize], world: &World, oracle: &mut Oracle<'_>, notes: &mut Vec<Note>) -> Result<Vec<Emission>, OracleError> {
        let n = self.take_nonce();
        let Some(doc) = self.window(w).and_then(Window::active_doc).cloned() else { return Ok(Vec::new()) };
        let tree = tree::clean(&self.windows, &doc.origin);
        let host = doc.origin.proj(field::origin::HOST);
        let protocol = doc.origin.proj(field::origin::PROTOCOL);
        let host_cookies = dict_get(&self.cookies, &host);
        let cookies = Term::seq(
            host_cookies
                .items()
                .iter()
                .filter(|c| !netmodel::cookie_flag(c, field::cookie::HTTP_ONLY))
                .filter(|c| !netmodel::cookie_flag(c, field::cookie::SECURE) || protocol == tok::S)
                .filter_map(|c| Some(Term::pair(c.at(field::cookie::NAME)?.clone(), netmodel::cookie_value(c))))
                .collect(),
        );
        let session_key = Term::pair(doc.origin.clone(), self.top_level_nonce(w));
        let session = dict_get(&self.session_storage, &session_key);
        let local = dict_get(&self.local_storage, &doc.origin);
        let secret = dict_get(&self.secrets, &doc.origin);
        let input = Term::seq(vec![
            tree,
            doc.nonce.clone(),
            doc.scriptstate.clone(),
            Term::seq(doc.scriptinput.clone()),
            cookies,
            local,
            session,
            secret,
        ]);
        let mut source = NonceSource::new(self.owner.clone(), self.next_nonce, self.used_indices());
        let Some(out) = scripts::run_script(&doc.script, &input, &mut source, oracle, world)? else {
            return Ok(Vec::new());
        };
        for drawn in source.drawn() {
            self.nonces.push(drawn.clone());
        }
        self.next_nonce = source.next();
        self.mark_used(&out);
        notes.push(Note::ScriptRun {
            browser: self.owner.clone(),
            script: doc.script.clone(),
            input: input.clone(),
            output: out.clone(),
            pool: source.pool(),
            host_cookies: host_cookies.clone(),
        });
        let [state, cookies_out, local_out, session_out, command] = out.items() else { return Ok(Vec::new()) };
        let merged = cookie_merge(host_cookies.items(), cookies_out.items());
        self.cookies = dict_put(&self.cookies, host.clone(), Term::seq(merged));
        self.local_storage = dict_put(&self.local_storage, doc.origin.clone(), local_out.clone());
        self.session_storage = dict_put(&self.session_storage, session_key, session_out.clone());
        if let Some(d) = self.window_mut(w).and_then(Window::active_doc_mut) {
            d.scriptstate = state.clone();
        }
        Ok(self.dispatch(w, &doc, command, n, notes))
    }

    fn dispatch(&mut self, w: &[usize], doc: &Document, command: &Term, n: Term, notes: &mut Vec<Note>) -> Vec<Emission> {
        let items = command.items();
        let Some(head) = items.first() else { return Vec::new() };
        let get = |url: &Term, nonce: Term, method: Term, params: Term, body: Term| HttpRequest {
            nonce,
            method,
            host: url.proj(field::url::HOST),
            path: url.proj(field::url::PATH),
            params,
            headers: Term::empty(),
            body,
        };
        match (head, items) {
            (h, [_, url, target]) if *h == tok::HREF && netmodel::is_url(url) => {
                let target_ptr = self.get_navigable_window(w, target);
                let req = get(url, n, tok::GET, url.proj(field::url::PARAMS), Term::empty());
                let reference = self.window(&target_ptr).map(|x| x.nonce.clone()).unwrap_or(Term::Undef);
                self.cancel_nav(&reference);
                self.send(reference, req, url.proj(field::url::PROTOCOL), Term::Bot, notes)
            }
            (h, [_, url, target]) if *h == tok::IFRAME && netmodel::is_url(url) => {
                let target_ptr = self.get_window(w, target);
                let req = get(url, n, tok::GET, url.proj(field::url::PARAMS), Term::empty());
                let frame = self.take_nonce();
                let Some(d) = self.window_mut(&target_ptr).and_then(Window::active_doc_mut) else { return Vec::new() };
                d.subwindows.push(Window { nonce: frame.clone(), documents: Vec::new(), opener: Term::Bot });
                self.send(frame, req, url.proj(field::url::PROTOCOL), Term::Bot, notes)
            }
            (h, [_, url, method, data, target]) if *h == tok::FORM && netmodel::is_url(url) => {
                if *method != tok::GET && *method != tok::POST {
                    return Vec::new();
                }
                let target_ptr = self.get_navigable_window(w, target);
                let (body, params, origin) = if *method == tok::GET {
                    (Term::empty(), data.clone(), Term::Bot)
                } else {
                    (data.clone(), url.proj(field::url::PARAMS), doc.origin.clone())
                };
                let req = get(url, n, method.clone(), params, body);
                let reference = self.window(&target_ptr).map(|x| x.nonce.clone()).unwrap_or(Term::Undef);
                self.cancel_nav(&reference);
                self.send(reference, req, url.proj(field::url::PROTOCOL), origin, notes)
            }
            (h, [_, target, script]) if *h == tok::SETSCRIPT => {
                let p = self.get_window(w, target);
                if let Some(d) = self.window_mut(&p).and_then(Window::active_doc_mut) {
                    d.script = script.clone();
                }
                Vec::new()
            }
            (h, [_, target, state]) if *h == tok::SETSCRIPTSTATE => {
                let p = self.get_window(w, target);
                if let Some(d) = self.window_mut(&p).and_then(Window::active_doc_mut) {
                    d.scriptstate = state.clone();
                }
                Vec::new()
            }
            (h, [_, url, method, data, xhr_ref]) if *h == tok::XHR && netmodel::is_url(url) => {
                if [tok::CONNECT, tok::TRACE, tok::TRACK].contains(method) || !netmodel::is_method(method) {
                    return Vec::new();
                }
                if url.proj(field::url::HOST) != doc.origin.proj(field::origin::HOST)
                    || url.proj(field::url::PROTOCOL) != doc.origin.proj(field::origin::PROTOCOL)
                {
                    return Vec::new();
                }
                let (data, origin) = if *method == tok::GET || *method == tok::HEAD {
                    (Term::empty(), Term::Bot)
                } else {
                    (data.clone(), doc.origin.clone())
                };
                let req = get(url, n, method.clone(), url.proj(field::url::PARAMS), data);
                self.send(Term::pair(doc.nonce.clone(), xhr_ref.clone()), req, url.proj(field::url::PROTOCOL), origin, notes)
            }
            (h, [_, target]) if *h == tok::BACK || *h == tok::FORWARD => {
                let p = self.get_navigable_window(w, target);
                let back = *h == tok::BACK;
                let mut cancel = None;
                if let Some(win) = self.window_mut(&p) {
                    if let Some(j) = win.active_index() {
                        let to = if back { j.checked_sub(1) } else { Some(j + 1).filter(|&k| k < win.documents.len()) };
                        if let Some(k) = to {
                            win.documents[j].active = false;
                            win.documents[k].active = true;
                            cancel = Some(win.nonce.clone());
                        }
                    }
                }
                if let Some(r) = cancel {
                    self.cancel_nav(&r);
                }
                Vec::new()
            }
            (h, [_, target]) if *h == tok::CLOSE => {
                let p = self.get_navigable_window(w, target);
                self.remove_window(&p);
                Vec::new()
            }
            (h, [_, target, message, origin]) if *h == tok::POSTMESSAGE => {
                let sender_nonce = self.window(w).map(|x| x.nonce.clone()).unwrap_or(Term::Undef);
                if let Some(p) = self.find_window(target) {
                    if let Some(d) = self.window_mut(&p).and_then(Window::active_doc_mut) {
                        if *origin == Term::Bot || d.origin == *origin {
                            d.scriptinput.push(Term::seq(vec![tok::POSTMESSAGE, sender_nonce, doc.origin.clone(), message.clone()]));
                        }
                    }
                }
                Vec::new()
            }
            _ => Vec::new(),
        }
    }

    fn remove_window(&mut self, p: &[usize]) {
        match p.split_last() {
            Some((&i, [])) => {
                if i < self.windows.len() {
                    self.windows.remove(i);
                }
            }
            Some((&i, parent)) => {
                if let Some(d) = self.window_mut(parent).and_then(Window::active_doc_mut) {
                    if i < d.subwindows.len() {
                        d.subwindows.remove(i);
                    }
                }
            }
            None => {}
        }
    }

    /// Handles an HTTP response matched to a pending request.
    pub fn process_response(&mut self, response: &Term, reference: &Term, request: &HttpRequest, protocol: Term, notes: &mut Vec<Note>) -> Next {
        let original = self.clone();
        let n = self.take_nonce();
        let headers = response.proj(field::response::HEADERS);
        let header_keys = dict_keys(&headers);
        if header_keys.contains(&tok::SET_COOKIE) {
            for c in dict_get(&headers, &tok::SET_COOKIE).items() {
                if netmodel::is_cookie(c) {
                    let old = dict_get(&self.cookies, &request.host);
                    self.cookies = dict_put(&self.cookies, request.host.clone(), Term::seq(add_cookie(old.items(), c.clone())));
                }
            }
        }
        if header_keys.contains(&tok::STS) && protocol == tok::S && !self.sts.contains(&request.host) {
            self.sts.push(request.host.clone());
        }
        let status = response.proj(field::response::STATUS);
        if header_keys.contains(&tok::LOCATION) && (status == tok::STATUS_303 || status == tok::STATUS_307) {
            let url = dict_get(&headers, &tok::LOCATION);
            let mut method = request.method.clone();
            let mut body = request.body.clone();
            let origin = if dict_keys(&request.headers).contains(&tok::ORIGIN) {
                Term::pair(request.header(&tok::ORIGIN), Term::pair(request.host.clone(), protocol.clone()))
            } else {
                Term::Bot
            };
            if status == tok::STATUS_303 && method != tok::GET && method != tok::HEAD {
                method = tok::GET;
                body = Term::empty();
            }
            // XHRs are never redirected.
            if self.find_window(reference).is_none() {
                *self = original;
                return Next::Keep;
            }
            if !netmodel::is_url(&url) {
                return Next::Update(Vec::new());
            }
            let req = HttpRequest {
                nonce: n,
                method,
                host: url.proj(field::url::HOST),
                path: url.proj(field::url::PATH),
                params: url.proj(field::url::PARAMS),
                headers: Term::empty(),
                body,
            };
            return Next::Update(self.send(reference.clone(), req, url.proj(field::url::PROTOCOL), origin, notes));
        }
        if let Some(p) = self.find_window(reference) {
            let body = response.proj(field::response::BODY);
            let doc = Document {
                nonce: n,
                origin: netmodel::origin(request.host.clone(), protocol),
                script: body.proj(1),
                scriptstate: body.proj(2),
                scriptinput: Vec::new(),
                subwindows: Vec::new(),
                active: true,
            };
            if let Some(win) = self.window_mut(&p) {
                if let Some(i) = win.active_index() {
                    win.documents[i].active = false;
                    win.documents.truncate(i + 1);
                } else {
                    win.documents.clear();
                }
                win.documents.push(doc);
            }
            return Next::Update(Vec::new());
        }
        let doc_ref = reference.proj(1);
        for p in self.subwindows() {
            if let Some(d) = self.window_mut(&p).and_then(Window::active_doc_mut) {
                if d.nonce == doc_ref {
                    d.scriptinput.push(Term::seq(vec![tok::XHR, response.proj(field::response::BODY), reference.proj(2)]));
                    break;
                }
            }
        }
        Next::Update(Vec::new())
    }

    /// The browser relation for one event addressed to `receiver`.
    pub fn relation(&mut self, receiver: &Term, sender: &Term, m: &Term, world: &World, oracle: &mut Oracle<'_>, notes: &mut Vec<Note>) -> Result<Next, OracleError> {
        if self.corruption != Corruption::Honest {
            return self.corrupt_step(receiver, m, world, oracle, notes);
        }
        let original = self.clone();
        let n = self.take_nonce();
        if *m == tok::TRIGGER {
            let switch = oracle.choose("browser.main.switch", &[Term::nat(1), Term::nat(2)])?;
            if switch == 0 {
                let with_docs: Vec<WinPtr> = self.subwindows().into_iter().filter(|p| self.window(p).is_some_and(|w| !w.documents.is_empty())).collect();
                if with_docs.is_empty() {
                    return Ok(Next::Update(Vec::new()));
                }
                let nonces: Vec<Term> = with_docs.iter().map(|p| self.window(p).map(|w| w.nonce.clone()).unwrap_or(Term::Undef)).collect();
                let i = oracle.choose("browser.main.window", &nonces)?;
                let out = self.run_script(&with_docs[i], world, oracle, notes)?;
                return Ok(Next::Update(out));
            }
            self.windows.push(Window { nonce: n.clone(), documents: Vec::new(), opener: Term::Bot });
            if world.vocab.urls.is_empty() {
                return Ok(Next::Update(Vec::new()));
            }
            let i = oracle.choose("browser.user.url", &world.vocab.urls)?;
            let url = world.vocab.urls[i].clone();
            let n2 = self.take_nonce();
            let req = HttpRequest {
                nonce: n2,
                method: tok::GET,
                host: url.proj(field::url::HOST),
                path: url.proj(field::url::PATH),
                params: url.proj(field::url::PARAMS),
                headers: Term::empty(),
                body: Term::empty(),
            };
            return Ok(Next::Update(self.send(n, req, url.proj(field::url::PROTOCOL), Term::Bot, notes)));
        }
        if *m == tok::FULLCORRUPT {
            self.corruption = Corruption::Full;
            return Ok(Next::Update(Vec::new()));
        }
        if *m == tok::CLOSECORRUPT {
            self.secrets = Term::empty();
            self.windows.clear();
            self.pending_dns = Term::empty();
            self.pending_requests.clear();
            self.session_storage = Term::empty();
            let kept: Vec<Term> = self
                .cookies
                .items()
                .iter()
                .map(|kv| {
                    let jar: Vec<Term> = kv.proj(2).items().iter().filter(|c| !netmodel::cookie_flag(c, field::cookie::SESSION)).cloned().collect();
                    Term::pair(kv.proj(1), Term::seq(jar))
                })
                .collect();
            self.cookies = Term::seq(kept);
            self.corruption = Corruption::Close;
            return Ok(Next::Update(Vec::new()));
        }
        let encrypted = self.pending_requests.iter().position(|p| {
            p.server == *sender && Term::dec_s(m, &p.key).proj(1) == tok::HTTP_RESP
        });
        if let Some(i) = encrypted {
            let p = self.pending_requests[i].clone();
            let plain = Term::dec_s(m, &p.key);
            if plain.proj(field::response::NONCE) != p.request.nonce {
                *self = original;
                return Ok(Next::Keep);
            }
            self.pending_requests.remove(i);
            let next = self.process_response(&plain, &p.reference, &p.request, tok::S, notes);
            if matches!(next, Next::Keep) {
                *self = original;
            }
            return Ok(next);
        }
        if m.proj(1) == tok::HTTP_RESP {
            let plain = self.pending_requests.iter().position(|p| {
                p.key == Term::Bot && p.server == *sender && m.proj(field::response::NONCE) == p.request.nonce
            });
            if let Some(i) = plain {
                let p = self.pending_requests.remove(i);
                let next = self.process_response(m, &p.reference, &p.request, tok::P, notes);
                if matches!(next, Next::Keep) {
                    *self = original;
                }
                return Ok(next);
            }
        }
        if netmodel::is_dns_response(m) {
            let nonce = m.proj(field::dns::NONCE);
            if !dict_keys(&original.pending_dns).contains(&nonce) {
                *self = original;
                return Ok(Next::Keep);
            }
            let entry = dict_get(&original.pending_dns, &nonce);
            let (Some(reference), Some(Some(message)), Some(protocol)) = (entry.at(1), entry.at(2).map(HttpRequest::parse), entry.at(3)) else {
                *self = original;
                return Ok(Next::Keep);
            };
            let result = m.proj(field::dns::RESULT);
            let payload = if *protocol == tok::S {
                let k = self.take_nonce();
                self.pending_requests.push(Pending { reference: reference.clone(), request: message.clone(), key: k.clone(), server: result.clone() });
                netmodel::https_wrap(message.to_term(), k, dict_get(&self.key_mapping, &message.host))
            } else {
                self.pending_requests.push(Pending { reference: reference.clone(), request: message.clone(), key: Term::Bot, server: result.clone() });
                message.to_term()
            };
            self.pending_dns = dict_remove(&self.pending_dns, &nonce);
            return Ok(Next::Update(vec![Emission { receiver: result, sender: receiver.clone(), payload }]));
        }
        *self = original;
        Ok(Next::Keep)
    }

    /// A corrupted browser collects the message and emits one derivable message.
    fn corrupt_step(&mut self, receiver: &Term, m: &Term, world: &World, oracle: &mut Oracle<'_>, notes: &mut Vec<Note>) -> Result<Next, OracleError> {
        self.collected.push(m.clone());
        let pool = match self.corruption {
            Corruption::Close => NoncePool::OwnerExcept(self.owner.clone(), self.used_indices()),
            _ => NoncePool::Owner(self.owner.clone()),
        };
        let knowledge = vec![self.to_term()];
        let analysis = crate::derive::Analysis::of(&knowledge, pool.clone());
        let ctx = RecipeContext {
            knowledge: &knowledge,
            analysis: &analysis,
            goal: Goal::CorruptEmission { receivers: &world.addresses },
            vocab: &world.vocab,
            max_depth: world.recipe_depth,
            fallback: Term::pair(self.address.clone(), Term::empty()),
        };
        let (recipe, v) = oracle.recipe("browser.corrupt.emit", &ctx)?;
        notes.push(Note::CorruptEmission { browser: self.owner.clone(), state: knowledge[0].clone(), pool, recipe, emitted: v.clone() });
        let [to, payload] = v.items() else { unreachable!("goal validated the pair shape") };
        Ok(Next::Update(vec![Emission { receiver: to.clone(), sender: receiver.clone(), payload: payload.clone() }]))
    }
}
