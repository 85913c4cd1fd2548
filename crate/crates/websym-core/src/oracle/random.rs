//! Seeded random decider that proposes semantically plausible attacker messages.

use super::{Decider, Goal, OracleError, RecipeContext};
use crate::derive::NoncePool;
use crate::netmodel::{self, field};
use crate::terms::{tok, Term};
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform over candidates; recipes are synthesized from generated target terms.
#[derive(Clone, Debug)]
pub struct RandomDecider {
    rng: ChaCha8Rng,
}

impl RandomDecider {
    /// Run `run` of seed `seed`; distinct runs use distinct ChaCha streams.
    pub fn new(seed: u64, run: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run);
        RandomDecider { rng }
    }

    fn pick_from<'a>(&mut self, xs: &'a [Term]) -> Option<&'a Term> {
        (!xs.is_empty()).then(|| &xs[self.rng.random_range(0..xs.len())])
    }

    fn known<'a>(&mut self, ctx: &'a RecipeContext<'_>) -> Option<&'a Term> {
        let n = ctx.analysis.terms().count();
        (n > 0).then(|| ctx.analysis.terms().nth(self.rng.random_range(0..n))).flatten()
    }

    /// An unused nonce from the pool, if the pool grants any.
    fn fresh(&mut self, pool: &NoncePool) -> Option<Term> {
        let slack = self.rng.random_range(0..4u64);
        match pool {
            NoncePool::Owner(o) => Some(Term::nonce(o.clone(), 1000 + self.rng.random_range(0..64u64))),
            NoncePool::OwnerExcept(o, used) => Some(Term::nonce(o.clone(), used.iter().next_back().map_or(0, |m| m + 1) + slack)),
            _ => None,
        }
    }

    /// Recorded ⟨receiver, sender, message⟩ triples whose message satisfies `pred`.
    fn recorded<'a>(ctx: &'a RecipeContext<'_>, pred: impl Fn(&Term) -> bool) -> Vec<&'a Term> {
        ctx.knowledge.iter().filter(|t| t.items().len() == 3 && pred(&t.proj(3))).collect()
    }

    fn message(&mut self, ctx: &RecipeContext<'_>) -> Term {
        if self.rng.random_bool(0.5) {
            if let Some(t) = self.known(ctx) {
                return t.clone();
            }
        }
        self.pick_from(&ctx.vocab.tokens).cloned().unwrap_or_else(Term::empty)
    }

    fn emission(&mut self, ctx: &RecipeContext<'_>, receivers: &[Term], senders: &[Term]) -> Option<Term> {
        let r = self.pick_from(receivers)?.clone();
        let s = self.pick_from(senders)?.clone();
        match self.rng.random_range(0..6) {
            0 => Some(Term::seq(vec![r, s, self.known(ctx)?.clone()])),
            1 => {
                let asks = Self::recorded(ctx, netmodel::is_dns_request);
                let ask = *self.pick_from_refs(&asks)?;
                let answer = self.pick_from(&ctx.vocab.addresses)?.clone();
                let reply = netmodel::dns_response(answer, ask.proj(3).proj(field::dns::NONCE));
                Some(Term::seq(vec![ask.proj(2), ask.proj(1), reply]))
            }
            2 => {
                let host = self.pick_from(&ctx.vocab.domains)?.clone();
                let pubkey = ctx.analysis.terms().find(|t| t.items().len() == 2 && t.proj(1) == host && matches!(t.proj(2), Term::App(crate::terms::Func::Pub, _)))?.proj(2);
                let method = if self.rng.random_bool(0.5) { tok::GET } else { tok::POST };
                let path = self.pick_from(&ctx.vocab.paths).cloned().unwrap_or(Term::lit("/"));
                let headers = if self.rng.random_bool(0.5) { Term::empty() } else { Term::seq(vec![Term::pair(tok::COOKIE, self.message(ctx))]) };
                let body = if self.rng.random_bool(0.5) { Term::empty() } else { self.message(ctx) };
                let req = netmodel::HttpRequest { nonce: self.fresh(ctx.analysis.pool())?, method, host, path, params: Term::empty(), headers, body };
                let key = self.fresh(ctx.analysis.pool())?;
                Some(Term::seq(vec![r, s, netmodel::https_wrap(req.to_term(), key, pubkey)]))
            }
            3 => {
                let asks = Self::recorded(ctx, |m| m.proj(1) == tok::HTTP_REQ);
                let ask = *self.pick_from_refs(&asks)?;
                let script = self.pick_from(&ctx.vocab.scripts)?.clone();
                let resp = netmodel::HttpResponse { nonce: ask.proj(3).proj(field::request::NONCE), status: tok::STATUS_200, headers: Term::empty(), body: Term::pair(script, Term::Bot) };
                Some(Term::seq(vec![ask.proj(2), ask.proj(1), resp.to_term()]))
            }
            4 => {
                let cmd = [tok::TRIGGER, tok::FULLCORRUPT, tok::CLOSECORRUPT][self.rng.random_range(0..3)].clone();
                Some(Term::seq(vec![r, s, cmd]))
            }
            _ => Some(Term::seq(vec![r, s, self.message(ctx)])),
        }
    }

    fn pick_from_refs<'a, 'b>(&mut self, xs: &'b [&'a Term]) -> Option<&'b &'a Term> {
        (!xs.is_empty()).then(|| &xs[self.rng.random_range(0..xs.len())])
    }

    fn script_output(&mut self, ctx: &RecipeContext<'_>) -> Option<Term> {
        let input = ctx.knowledge.first()?;
        let mut windows: Vec<Term> = input.proj(1).nonces().into_iter().map(Term::Nonce).collect();
        windows.push(tok::BLANK);
        let target = self.pick_from(&windows)?.clone();
        let url = self.pick_from(&ctx.vocab.urls).cloned();
        let command = match self.rng.random_range(0..9) {
            0 => Term::seq(vec![tok::HREF, url?, target]),
            1 => Term::seq(vec![tok::IFRAME, url?, target]),
            2 => Term::seq(vec![tok::FORM, url?, tok::POST, self.message(ctx), target]),
            3 => Term::seq(vec![tok::XHR, url?, tok::POST, self.message(ctx), self.fresh(ctx.analysis.pool())?]),
            4 => {
                let origin = if self.rng.random_bool(0.5) { Term::Bot } else { netmodel::origin(self.pick_from(&ctx.vocab.domains)?.clone(), tok::S) };
                let tag = self.pick_from(&ctx.vocab.tokens).cloned().unwrap_or_else(Term::empty);
                Term::seq(vec![tok::POSTMESSAGE, target, Term::pair(tag, self.message(ctx)), origin])
            }
            5 => Term::seq(vec![tok::SETSCRIPT, target, self.pick_from(&ctx.vocab.scripts)?.clone()]),
            6 => Term::seq(vec![[tok::BACK, tok::FORWARD, tok::CLOSE][self.rng.random_range(0..3)].clone(), target]),
            _ => Term::empty(),
        };
        Some(Term::seq(vec![input.proj(3), input.proj(5), input.proj(6), input.proj(7), command]))
    }

    fn corrupt_emission(&mut self, ctx: &RecipeContext<'_>, receivers: &[Term]) -> Option<Term> {
        let r = self.pick_from(receivers)?.clone();
        let m = if self.rng.random_bool(0.5) { ctx.knowledge.first()?.clone() } else { self.message(ctx) };
        Some(Term::pair(r, m))
    }
}

impl Decider for RandomDecider {
    fn pick(&mut self, label: &str, candidates: &[Term]) -> Result<usize, OracleError> {
        if label == "attacker.emit.count" {
            // Mostly silent or single emissions keep pools small.
            let w = self.rng.random_range(0..10);
            return Ok([0, 0, 0, 0, 1, 1, 1, 1, 2, 3][w].min(candidates.len() - 1));
        }
        Ok(self.rng.random_range(0..candidates.len()))
    }

    fn recipe(&mut self, _label: &str, ctx: &RecipeContext<'_>) -> Result<Term, OracleError> {
        let target = match ctx.goal {
            Goal::Emission { receivers, senders } => self.emission(ctx, receivers, senders),
            Goal::CorruptEmission { receivers } => self.corrupt_emission(ctx, receivers),
            Goal::ScriptOutput => self.script_output(ctx),
        };
        let recipe = target
            .and_then(|t| ctx.analysis.synthesize(&crate::terms::normalize(&t)))
            .filter(|r| r.depth() <= ctx.max_depth && ctx.evaluate(r).is_ok());
        Ok(recipe.unwrap_or_else(|| ctx.fallback.clone()))
    }
}
