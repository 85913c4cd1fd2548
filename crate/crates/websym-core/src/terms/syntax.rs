//! Canonical s-expression form of terms; printer and parser round-trip exactly.

use super::{Func, Nonce, Term, Text};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("term syntax error at byte {offset}: {reason}")]
pub struct ParseError {
    pub offset: usize,
    pub reason: &'static str,
}

fn func_name(f: Func) -> &'static str {
    match f {
        Func::Pub => "pub",
        Func::EncA => "enc-a",
        Func::DecA => "dec-a",
        Func::EncS => "enc-s",
        Func::DecS => "dec-s",
        Func::Sig => "sig",
        Func::CheckSig => "checksig",
        Func::ExtractMsg => "extractmsg",
        Func::Proj(_) => "proj",
    }
}

fn func_by_name(name: &str) -> Option<Func> {
    Some(match name {
        "pub" => Func::Pub,
        "enc-a" => Func::EncA,
        "dec-a" => Func::DecA,
        "enc-s" => Func::EncS,
        "dec-s" => Func::DecS,
        "sig" => Func::Sig,
        "checksig" => Func::CheckSig,
        "extractmsg" => Func::ExtractMsg,
        _ => return None,
    })
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.')
}

fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for b in s.bytes() {
        match b {
            b'"' => f.write_str("\\\"")?,
            b'\\' => f.write_str("\\\\")?,
            b'\n' => f.write_str("\\n")?,
            b'\t' => f.write_str("\\t")?,
            0x20..=0x7e => f.write_char(b as char)?,
            _ => write!(f, "\\x{b:02x}")?,
        }
    }
    f.write_char('"')
}

pub(super) fn write_term(f: &mut fmt::Formatter<'_>, t: &Term) -> fmt::Result {
    match t {
        Term::Top => f.write_str("@top"),
        Term::Bot => f.write_str("@bot"),
        Term::Undef => f.write_str("@undef"),
        Term::Str(s) => write_quoted(f, s),
        Term::Addr(a) => write!(f, "ip:{a}"),
        Term::Nonce(n) => write!(f, "#{}.{}", n.owner, n.index),
        Term::Var(v) => write!(f, "?{v}"),
        Term::Seq(items) => {
            f.write_str("(seq")?;
            for it in items.iter() {
                f.write_char(' ')?;
                write_term(f, it)?;
            }
            f.write_char(')')
        }
        Term::App(func, args) => {
            write!(f, "({}", func_name(*func))?;
            if let Func::Proj(i) = func {
                write!(f, " {i}")?;
            }
            for it in args.iter() {
                f.write_char(' ')?;
                write_term(f, it)?;
            }
            f.write_char(')')
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, reason: &'static str) -> Result<T, ParseError> {
        Err(ParseError { offset: self.pos, reason })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn ident(&mut self) -> &'a str {
        let start = self.pos;
        while self.pos < self.src.len() && is_ident_byte(self.src[self.pos]) {
            self.pos += 1;
        }
        // Identifier bytes are ASCII, so the slice is valid UTF-8.
        core::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default()
    }

    fn number(&mut self) -> Result<u64, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let digits = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        if digits.is_empty() {
            return self.err("expected a number");
        }
        digits.parse().or_else(|_| self.err("number out of range"))
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        self.skip_ws();
        match self.peek() {
            None => self.err("unexpected end of input"),
            Some(b'(') => self.compound(),
            Some(b'"') => self.string(),
            Some(b'@') => {
                self.pos += 1;
                match self.ident() {
                    "top" => Ok(Term::Top),
                    "bot" => Ok(Term::Bot),
                    "undef" => Ok(Term::Undef),
                    _ => self.err("unknown constant"),
                }
            }
            Some(b'#') => {
                self.pos += 1;
                let whole = self.ident();
                match whole.rsplit_once('.') {
                    Some((owner, idx)) if !owner.is_empty() && !idx.is_empty() && idx.bytes().all(|b| b.is_ascii_digit()) => {
                        let index = idx.parse().or_else(|_| self.err("nonce index out of range"))?;
                        Ok(Term::Nonce(Nonce::new(owner, index)))
                    }
                    _ => self.err("malformed nonce"),
                }
            }
            Some(b'?') => {
                self.pos += 1;
                let name = self.ident();
                if name.is_empty() {
                    return self.err("empty variable name");
                }
                Ok(Term::Var(Text::from(name)))
            }
            Some(b'i') if self.src[self.pos..].starts_with(b"ip:") => {
                self.pos += 3;
                let name = self.ident();
                if name.is_empty() {
                    return self.err("empty address");
                }
                Ok(Term::Addr(Text::from(name)))
            }
            _ => self.err("unexpected character"),
        }
    }

    fn string(&mut self) -> Result<Term, ParseError> {
        self.pos += 1;
        let mut out: Vec<u8> = Vec::new();
        loop {
            match self.peek() {
                None => return self.err("unterminated string"),
                Some(b'"') => {
                    self.pos += 1;
                    break;
                }
                Some(b'\\') => {
                    self.pos += 1;
                    match self.peek() {
                        Some(b'"') => out.push(b'"'),
                        Some(b'\\') => out.push(b'\\'),
                        Some(b'n') => out.push(b'\n'),
                        Some(b't') => out.push(b'\t'),
                        Some(b'x') => {
                            let hex = self.src.get(self.pos + 1..self.pos + 3);
                            let byte = hex
                                .and_then(|h| core::str::from_utf8(h).ok())
                                .and_then(|h| u8::from_str_radix(h, 16).ok());
                            match byte {
                                Some(b) => out.push(b),
                                None => return self.err("bad hex escape"),
                            }
                            self.pos += 2;
                        }
                        _ => return self.err("bad escape"),
                    }
                    self.pos += 1;
                }
                Some(b) => {
                    out.push(b);
                    self.pos += 1;
                }
            }
        }
        match String::from_utf8(out) {
            Ok(s) => Ok(Term::Str(Text::from(s))),
            Err(_) => self.err("string is not valid UTF-8"),
        }
    }

    fn compound(&mut self) -> Result<Term, ParseError> {
        self.pos += 1;
        self.skip_ws();
        let head = self.ident();
        let func = match head {
            "seq" => None,
            "proj" => {
                self.skip_ws();
                let i = self.number()?;
                if i == 0 || i > u32::MAX as u64 {
                    return self.err("projection index must be positive");
                }
                Some(Func::Proj(i as u32))
            }
            other => match func_by_name(other) {
                Some(f) => Some(f),
                None => return self.err("unknown head symbol"),
            },
        };
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b')') => {
                    self.pos += 1;
                    break;
                }
                None => return self.err("unterminated list"),
                _ => items.push(self.term()?),
            }
        }
        match func {
            None => Ok(Term::seq(items)),
            Some(f) if f.arity() == items.len() => Ok(Term::app(f, items)),
            Some(_) => self.err("wrong arity"),
        }
    }
}

/// Parses one term in canonical syntax; surrounding whitespace is allowed.
pub fn parse(src: &str) -> Result<Term, ParseError> {
    let mut p = Parser { src: src.as_bytes(), pos: 0 };
    let t = p.term()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return p.err("trailing input");
    }
    Ok(t)
}

impl core::str::FromStr for Term {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, ParseError> {
        parse(s)
    }
}

impl serde::Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Term {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = <String as serde::Deserialize>::deserialize(deserializer)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}
