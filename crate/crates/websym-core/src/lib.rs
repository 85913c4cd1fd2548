//! Symbolic Dolev-Yao web model with browsers, DNS, BrowserID parties and run monitors.
#![no_std]

extern crate alloc;

pub mod browser;
pub mod browserid;
pub mod derive;
pub mod netmodel;
pub mod oracle;
pub mod properties;
pub mod runtime;
pub mod scenario;
pub mod scripts;
pub mod terms;

pub use terms::{equiv, normalize, Func, Nonce, Term, Text};
