//! Message and data formats: URLs, origins, cookies, HTTP(S) and DNS, plus the DNS server.

use crate::terms::{dict_get, tok, Func, Term};
use alloc::vec;
use alloc::vec::Vec;

/// Positions of named fields (1-based) per message shape.
pub mod field {
    pub mod url {
        pub const PROTOCOL: usize = 2;
        pub const HOST: usize = 3;
        pub const PATH: usize = 4;
        pub const PARAMS: usize = 5;
    }
    pub mod origin {
        pub const HOST: usize = 1;
        pub const PROTOCOL: usize = 2;
    }
    pub mod cookie {
        pub const NAME: usize = 1;
        pub const CONTENT: usize = 2;
        pub const VALUE: usize = 1;
        pub const SECURE: usize = 2;
        pub const SESSION: usize = 3;
        pub const HTTP_ONLY: usize = 4;
    }
    pub mod request {
        pub const NONCE: usize = 2;
        pub const METHOD: usize = 3;
        pub const HOST: usize = 4;
        pub const PATH: usize = 5;
        pub const PARAMS: usize = 6;
        pub const HEADERS: usize = 7;
        pub const BODY: usize = 8;
    }
    pub mod response {
        pub const NONCE: usize = 2;
        pub const STATUS: usize = 3;
        pub const HEADERS: usize = 4;
        pub const BODY: usize = 5;
    }
    pub mod dns {
        pub const DOMAIN: usize = 2;
        pub const RESULT: usize = 2;
        pub const NONCE: usize = 3;
    }
}

pub const METHODS: [Term; 9] = [
    tok::GET,
    tok::HEAD,
    tok::POST,
    Term::lit("PUT"),
    Term::lit("DELETE"),
    Term::lit("OPTIONS"),
    tok::CONNECT,
    tok::TRACE,
    tok::TRACK,
];

pub fn is_method(t: &Term) -> bool {
    METHODS.contains(t)
}

pub fn is_protocol(t: &Term) -> bool {
    *t == tok::P || *t == tok::S
}

/// A dictionary with string keys, pairwise distinct.
pub fn is_string_dict(t: &Term) -> bool {
    let Some(items) = t.as_seq() else { return false };
    let mut keys: Vec<&Term> = Vec::with_capacity(items.len());
    for kv in items {
        match kv.as_seq() {
            Some([k @ Term::Str(_), _]) if !keys.contains(&k) => keys.push(k),
            _ => return false,
        }
    }
    true
}

pub fn url(protocol: Term, host: Term, path: Term, params: Term) -> Term {
    Term::seq(vec![tok::URL, protocol, host, path, params])
}

pub fn is_url(t: &Term) -> bool {
    matches!(t.as_seq(), Some([tag, p, Term::Str(_), Term::Str(_), params])
        if *tag == tok::URL && is_protocol(p) && is_string_dict(params))
}

pub fn origin(host: Term, protocol: Term) -> Term {
    Term::pair(host, protocol)
}

pub fn is_origin(t: &Term) -> bool {
    matches!(t.as_seq(), Some([Term::Str(_), p]) if is_protocol(p))
}

pub fn cookie(name: Term, value: Term, secure: bool, session: bool, http_only: bool) -> Term {
    Term::pair(name, Term::seq(vec![value, Term::truth(secure), Term::truth(session), Term::truth(http_only)]))
}

fn is_flag(t: &Term) -> bool {
    matches!(t, Term::Top | Term::Bot)
}

pub fn is_cookie(t: &Term) -> bool {
    match t.as_seq() {
        Some([_, content]) => matches!(content.as_seq(), Some([_, a, b, c]) if is_flag(a) && is_flag(b) && is_flag(c)),
        _ => false,
    }
}

/// Flag of a cookie's content, false for malformed cookies.
pub fn cookie_flag(c: &Term, flag: usize) -> bool {
    c.at(field::cookie::CONTENT).and_then(|content| content.at(flag)) == Some(&Term::Top)
}

pub fn cookie_value(c: &Term) -> Term {
    crate::terms::deref(c, &[field::cookie::CONTENT, field::cookie::VALUE])
}

/// View of an HTTP request's components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HttpRequest {
    pub nonce: Term,
    pub method: Term,
    pub host: Term,
    pub path: Term,
    pub params: Term,
    pub headers: Term,
    pub body: Term,
}

impl HttpRequest {
    pub fn to_term(&self) -> Term {
        Term::seq(vec![
            tok::HTTP_REQ,
            self.nonce.clone(),
            self.method.clone(),
            self.host.clone(),
            self.path.clone(),
            self.params.clone(),
            self.headers.clone(),
            self.body.clone(),
        ])
    }

    /// Accepts exactly the request grammar.
    pub fn parse(t: &Term) -> Option<Self> {
        match t.as_seq()? {
            [tag, nonce @ Term::Nonce(_), method, host @ Term::Str(_), path @ Term::Str(_), params, headers, body]
                if *tag == tok::HTTP_REQ && is_method(method) && is_string_dict(params) && is_string_dict(headers) =>
            {
                Some(HttpRequest {
                    nonce: nonce.clone(),
                    method: method.clone(),
                    host: host.clone(),
                    path: path.clone(),
                    params: params.clone(),
                    headers: headers.clone(),
                    body: body.clone(),
                })
            }
            _ => None,
        }
    }

    pub fn header(&self, name: &Term) -> Term {
        dict_get(&self.headers, name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HttpResponse {
    pub nonce: Term,
    pub status: Term,
    pub headers: Term,
    pub body: Term,
}

impl HttpResponse {
    pub fn to_term(&self) -> Term {
        Term::seq(vec![tok::HTTP_RESP, self.nonce.clone(), self.status.clone(), self.headers.clone(), self.body.clone()])
    }

    pub fn parse(t: &Term) -> Option<Self> {
        match t.as_seq()? {
            [tag, nonce @ Term::Nonce(_), status @ Term::Str(_), headers, body] if *tag == tok::HTTP_RESP && is_string_dict(headers) => {
                Some(HttpResponse { nonce: nonce.clone(), status: status.clone(), headers: headers.clone(), body: body.clone() })
            }
            _ => None,
        }
    }

    /// Whether the header name occurs as a key.
    pub fn has_header(&self, name: &Term) -> bool {
        crate::terms::dict_keys(&self.headers).contains(name)
    }

    pub fn header(&self, name: &Term) -> Term {
        dict_get(&self.headers, name)
    }
}

pub fn dns_request(domain: Term, nonce: Term) -> Term {
    Term::seq(vec![tok::DNS_RESOLVE, domain, nonce])
}

pub fn dns_response(result: Term, nonce: Term) -> Term {
    Term::seq(vec![tok::DNS_RESOLVED, result, nonce])
}

pub fn is_dns_request(t: &Term) -> bool {
    matches!(t.as_seq(), Some([tag, Term::Str(_), Term::Nonce(_)]) if *tag == tok::DNS_RESOLVE)
}

pub fn is_dns_response(t: &Term) -> bool {
    matches!(t.as_seq(), Some([tag, Term::Addr(_), Term::Nonce(_)]) if *tag == tok::DNS_RESOLVED)
}

/// `enc_a(⟨req, k'⟩, pub)`.
pub fn https_wrap(request: Term, sym_key: Term, pub_key: Term) -> Term {
    Term::enc_a(Term::pair(request, sym_key), pub_key)
}

/// Decrypts with the server key; succeeds iff the plaintext is ⟨request, key⟩.
pub fn https_unwrap_request(ciphertext: &Term, private_key: &Term) -> Option<(HttpRequest, Term)> {
    let plain = Term::dec_a(ciphertext, private_key);
    match plain.as_seq()? {
        [req, key] => Some((HttpRequest::parse(req)?, key.clone())),
        _ => None,
    }
}

pub fn https_wrap_response(response: Term, sym_key: Term) -> Term {
    Term::enc_s(response, sym_key)
}

/// Pure DNS server relation: the response message for a resolvable request.
pub fn dns_relation(m: &Term, table: &Term) -> Option<Term> {
    let [tag, domain, nonce] = m.as_seq()? else { return None };
    if *tag != tok::DNS_RESOLVE {
        return None;
    }
    let key = crate::terms::dict_keys(table).into_iter().find(|k| k == domain)?;
    Some(dns_response(dict_get(table, &key), nonce.clone()))
}

/// True for a term shaped like an encrypted HTTP request.
pub fn looks_like_https_request(t: &Term) -> bool {
    matches!(t, Term::App(Func::EncA, _))
}
