//! Plans for the bundled guided schedules: the honest login and the three exploits.

use crate::director::Director;
use websym_core::browserid::{self, path, pm, BROWSERID_STATE, KEY_PAIRS};
use websym_core::netmodel::{self, field, HttpRequest};
use websym_core::oracle::RecipeContext;
use websym_core::oracle::Oracle;
use websym_core::runtime::{run, Configuration, Monitor, Trace};
use websym_core::scenario::{Scenario, ScenarioError};
use websym_core::scripts::ATT_SCRIPT;
use websym_core::terms::{dict_get, tok, Term};

/// Honest login of b1 as alice; later milestones include the earlier ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Milestone {
    /// LPO session of b1 authenticated for alice.
    Authenticated,
    /// LD holds alice's UC and has posted the CAP to the RP page.
    CapDelivered,
    /// RP has issued the service token.
    Token,
}

/// Window positions in b1's preorder during the honest login.
const RP_WINDOW: usize = 0;
const CIF_WINDOW: usize = 1;
const LD_WINDOW: usize = 2;

fn parts(e: &Term) -> (&Term, &Term, &Term, &Term) {
    let i = e.items();
    (&i[0], &i[1], &i[2], &i[3])
}

/// Builds directors against a scenario's party layout.
pub struct Planner<'s> {
    pub d: Director,
    s: &'s Scenario,
    next_att_nonce: u64,
}

/// A party as the plans see it.
#[derive(Clone)]
struct Party {
    pid: String,
    address: Term,
}

impl<'s> Planner<'s> {
    pub fn new(s: &'s Scenario) -> Self {
        Planner { d: Director::new(), s, next_att_nonce: 100 }
    }

    pub fn finish(self) -> Director {
        self.d
    }

    fn browser(&self, i: usize) -> Party {
        let b = &self.s.browsers[i];
        Party { pid: b.pid.clone(), address: b.address.clone() }
    }

    fn rp(&self) -> Party {
        Party { pid: self.s.rps[0].pid.clone(), address: self.s.rps[0].address.clone() }
    }

    fn lpo(&self) -> Party {
        Party { pid: self.s.lpo.server.pid.clone(), address: self.s.lpo.server.address.clone() }
    }

    fn att(&self) -> Party {
        Party { pid: self.s.attacker.pid.clone(), address: self.s.attacker.address.clone() }
    }

    fn att_nonce(&mut self) -> Term {
        let n = Term::nonce(self.s.attacker.pid.as_str(), self.next_att_nonce);
        self.next_att_nonce += 1;
        n
    }

    fn receiver(&mut self, p: &Party) {
        let pid = Term::str(p.pid.as_str());
        self.d.maybe("runtime.receiver", format!("receiver {}", p.pid), move |_, t| *t == pid);
    }

    /// Delivers the first pending event to `to` emitted by `from` whose payload satisfies `pred`.
    fn deliver(&mut self, to: &Party, from: &str, what: &str, pred: impl Fn(&Term) -> bool + 'static) {
        let (addr, from_pid) = (to.address.clone(), from.to_string());
        self.d.pick("runtime.event", format!("{what} to {}", to.pid), move |_, e| {
            let (r, _, m, prov) = parts(e);
            *r == addr && prov.as_str() == Some(from_pid.as_str()) && pred(m)
        });
        self.receiver(to);
    }

    fn trigger(&mut self, p: &Party) {
        let addr = p.address.clone();
        self.d.pick("runtime.event", format!("trigger {}", p.pid), move |_, e| {
            let (r, _, m, prov) = parts(e);
            *r == addr && *m == tok::TRIGGER && prov.as_str() == Some("env")
        });
        self.receiver(p);
    }

    /// The user of `b` opens a new window and types `url`.
    fn visit(&mut self, b: &Party, url: Term) {
        self.trigger(b);
        self.d.pick("browser.main.switch", "new window", |_, t| *t == Term::nat(2));
        self.d.pick("browser.user.url", format!("type {url}"), move |_, t| *t == url);
    }

    /// Runs the script in window `window` (preorder position among windows with documents).
    fn script(&mut self, b: &Party, window: usize) {
        self.trigger(b);
        self.d.pick("browser.main.switch", "run a script", |_, t| *t == Term::nat(1));
        self.d.maybe("browser.main.window", format!("window {window}"), move |i, _| i == window);
    }

    /// Attacker emission count for the event it is just processing.
    fn emits(&mut self, n: usize) {
        self.d.pick("attacker.emit.count", format!("{n} emissions"), move |_, t| *t == Term::nat(n));
    }

    fn emit(&mut self, what: &str, target: impl Fn(&RecipeContext<'_>) -> Option<Term> + 'static) {
        self.d.recipe("attacker.emit", what.to_string(), target);
    }

    /// The attacker, acting as DNS server, answers `b`'s lookup of `domain` truthfully.
    fn dns(&mut self, b: &Party, domain: &Term) {
        let att = self.att();
        let (d1, d2) = (domain.clone(), domain.clone());
        self.deliver(&att, &b.pid, &format!("DNS query for {domain}"), move |m| netmodel::is_dns_request(m) && m.proj(2) == d1);
        self.emits(1);
        let answer = dict_get(&self.s.dns_table(), domain);
        let (baddr, aaddr) = (b.address.clone(), att.address.clone());
        self.emit(&format!("DNS answer for {domain}"), move |ctx| {
            let q = ctx.knowledge.iter().rev().find(|t| t.proj(2) == baddr && netmodel::is_dns_request(&t.proj(3)) && t.proj(3).proj(2) == d2)?;
            Some(Term::seq(vec![baddr.clone(), aaddr.clone(), netmodel::dns_response(answer.clone(), q.proj(3).proj(field::dns::NONCE))]))
        });
        self.deliver(b, &att.pid, "DNS answer", netmodel::is_dns_response);
    }

    /// DNS resolution, then delivery of `b`'s request to `server`.
    fn request(&mut self, b: &Party, server: &Party, domain: &Term) {
        self.dns(b, domain);
        self.deliver(server, &b.pid, "request", |_| true);
    }

    fn response(&mut self, b: &Party, server: &Party) {
        self.deliver(b, &server.pid, "response", |_| true);
    }

    fn exchange(&mut self, b: &Party, server: &Party, domain: &Term) {
        self.request(b, server, domain);
        self.response(b, server);
    }

    /// Honest login of browser 0 up to `until`.
    pub fn honest(&mut self, until: Milestone) {
        let b = self.browser(0);
        let (rp, lpo) = (self.rp(), self.lpo());
        let rp_domain = self.s.rps[0].domain.clone();
        let lpo_domain = self.s.lpo.server.domain.clone();
        self.visit(&b, netmodel::url(tok::S, rp_domain.clone(), path::ROOT, Term::empty()));
        self.exchange(&b, &rp, &rp_domain);
        // RP page embeds the CIF.
        self.script(&b, RP_WINDOW);
        self.exchange(&b, &lpo, &lpo_domain);
        self.script(&b, CIF_WINDOW);
        self.script(&b, RP_WINDOW);
        self.d.pick("rp_index.loaded.id", "no user logged in", |_, t| *t == Term::Bot);
        // RP page opens the login dialog.
        self.script(&b, RP_WINDOW);
        self.d.pick("rp_index.default.choice", "openLD", |_, t| t.is_str("openLD"));
        self.exchange(&b, &lpo, &lpo_domain);
        self.script(&b, LD_WINDOW);
        self.script(&b, RP_WINDOW);
        self.d.pick("rp_index.default.choice", "handlePM", |_, t| t.is_str("handlePM"));
        self.d.maybe("script.chooseinput", "ldready", |_, t| t.proj(4).proj(1) == pm::LDREADY);
        self.d.maybe("script.auxwindow", "login dialog", |_, _| true);
        // LD fetches the context, authenticates, refetches it.
        self.script(&b, LD_WINDOW);
        self.d.maybe("script.chooseinput", "request", |_, t| t.proj(4).proj(1) == pm::REQUEST);
        self.exchange(&b, &lpo, &lpo_domain);
        self.script(&b, LD_WINDOW);
        self.script(&b, LD_WINDOW);
        self.exchange(&b, &lpo, &lpo_domain);
        if until == Milestone::Authenticated {
            return;
        }
        self.script(&b, LD_WINDOW);
        self.exchange(&b, &lpo, &lpo_domain);
        // LD requests the UC and hands the CAP to the RP page.
        self.script(&b, LD_WINDOW);
        self.script(&b, LD_WINDOW);
        self.d.maybe("ld.requestuc.id", "first identity", |i, _| i == 0);
        self.exchange(&b, &lpo, &lpo_domain);
        self.script(&b, LD_WINDOW);
        if until == Milestone::CapDelivered {
            return;
        }
        self.script(&b, RP_WINDOW);
        self.d.pick("rp_index.default.choice", "handlePM", |_, t| t.is_str("handlePM"));
        self.d.maybe("script.chooseinput", "response", |_, t| t.proj(4).proj(1) == pm::RESPONSE);
        self.script(&b, RP_WINDOW);
        self.script(&b, RP_WINDOW);
        self.script(&b, RP_WINDOW);
        self.request(&b, &rp, &rp_domain);
    }

    /// Attacker makes the browser at `victim` corrupt itself with `command`.
    fn corrupt(&mut self, victim: &Party, command: Term) {
        let att = self.att();
        self.trigger(&att);
        self.emits(1);
        let (v, a) = (victim.address.clone(), att.address.clone());
        self.emit(&format!("{command} to {}", victim.pid), move |_| Some(Term::seq(vec![v.clone(), a.clone(), command.clone()])));
        self.deliver(victim, &att.pid, "corruption", |_| true);
    }

    /// A corrupted browser dumps its whole state to the attacker, who records it.
    fn dump(&mut self, victim: &Party) {
        let att = self.att();
        self.trigger(victim);
        let a = att.address.clone();
        self.d.recipe("browser.corrupt.emit", format!("{} dumps its state", victim.pid), move |ctx| Some(Term::pair(a.clone(), ctx.knowledge[0].clone())));
        self.deliver(&att, &victim.pid, "state dump", |_| true);
        self.emits(0);
    }

    /// Attacker sends an HTTPS request to `server`, built once its knowledge is at hand.
    fn att_https(&mut self, server: &Party, domain: &Term, what: &str, build: impl Fn(&RecipeContext<'_>, Term) -> Option<HttpRequest> + 'static) -> Term {
        let n = self.att_nonce();
        let k = self.att_nonce();
        let att = self.att();
        let (saddr, aaddr, dom) = (server.address.clone(), att.address.clone(), domain.clone());
        let nonce = n.clone();
        self.emit(what, move |ctx| {
            let req = build(ctx, nonce.clone())?;
            let pubkey = dict_get(&ctx.knowledge[1], &dom);
            Some(Term::seq(vec![saddr.clone(), aaddr.clone(), netmodel::https_wrap(req.to_term(), k.clone(), pubkey)]))
        });
        self.deliver(server, &att.pid, what, |_| true);
        n
    }

    /// Delivers `server`'s reply to the attacker, who then emits `follow_up` messages.
    fn att_receive(&mut self, server: &Party, follow_up: usize) {
        let att = self.att();
        self.deliver(&att, &server.pid, "response", |_| true);
        self.emits(follow_up);
    }

    /// Login injection: the attacker logs b1 into the RP as eve.
    pub fn login_injection(&mut self) {
        let (b1, b2, att) = (self.browser(0), self.browser(1), self.att());
        let (rp, lpo) = (self.rp(), self.lpo());
        let rp_domain = self.s.rps[0].domain.clone();
        let lpo_domain = self.s.lpo.server.domain.clone();
        let att_domain = self.s.attacker.domains[0].domain.clone();
        let eve = self.s.identities.iter().find(|i| i.owner == b2.pid).map(|i| i.id.clone()).expect("eve owned by b2");
        self.corrupt(&b2, tok::FULLCORRUPT);
        self.dump(&b2);
        // With eve's secret the attacker runs the LPO login itself.
        self.trigger(&att);
        self.emits(1);
        let host = lpo_domain.clone();
        let ctx_nonce = self.att_https(&lpo, &lpo_domain, "GET /ctx", move |_, n| Some(get(n, host.clone(), path::CTX)));
        let session = move |ctx: &RecipeContext<'_>| session_of(ctx, &ctx_nonce);
        let session2 = session.clone();
        self.att_receive(&lpo, 1);
        let lpo_origin = browserid::lpo_origin(&lpo_domain);
        let host = lpo_domain.clone();
        self.att_https(&lpo, &lpo_domain, "POST /auth", move |ctx, n| {
            let (sid, xsrf) = session(ctx)?;
            let secret = ctx.analysis.terms().find(|t| t.items().len() == 2 && t.proj(1) == lpo_origin && matches!(t.proj(2), Term::Nonce(_)))?.proj(2);
            Some(post(n, host.clone(), path::AUTH, sid, Term::pair(secret, xsrf)))
        });
        self.att_receive(&lpo, 1);
        let user_key = self.att_nonce();
        let uk = user_key.clone();
        let host = lpo_domain.clone();
        let cert_nonce = self.att_https(&lpo, &lpo_domain, "POST /certreq", move |ctx, n| {
            let (sid, xsrf) = session2(ctx)?;
            Some(post(n, host.clone(), path::CERTREQ, sid, Term::seq(vec![eve.clone(), Term::pub_key(uk.clone()), xsrf])))
        });
        self.att_receive(&lpo, 0);
        // b1 visits the attacker's page, which carries the forged CAP as script state.
        self.visit(&b1, netmodel::url(tok::P, att_domain.clone(), path::ROOT, Term::empty()));
        self.dns(&b1, &att_domain);
        self.deliver(&att, &b1.pid, "HTTP request", |m| m.proj(1) == tok::HTTP_REQ);
        self.emits(1);
        let (b1addr, aaddr) = (b1.address.clone(), att.address.clone());
        let rp_origin = netmodel::origin(rp_domain.clone(), tok::S);
        self.emit("attacker page", move |ctx| {
            let req = ctx.knowledge.iter().rev().find(|t| t.proj(2) == b1addr && t.proj(3).proj(1) == tok::HTTP_REQ)?.proj(3);
            let uc = response_body(ctx, &cert_nonce)?;
            let cap = browserid::cap(uc, browserid::ia(rp_origin.clone(), user_key.clone()));
            let resp = netmodel::HttpResponse { nonce: req.proj(field::request::NONCE), status: tok::STATUS_200, headers: Term::empty(), body: Term::pair(ATT_SCRIPT, cap) };
            Some(Term::seq(vec![b1addr.clone(), aaddr.clone(), resp.to_term()]))
        });
        self.deliver(&b1, &att.pid, "attacker page", |_| true);
        // The attacker page opens the RP in a new window.
        self.script(&b1, 0);
        let rp_url = netmodel::url(tok::S, rp_domain.clone(), path::ROOT, Term::empty());
        self.d.recipe("script.attacker", "open RP", move |ctx| {
            let x = &ctx.knowledge[0];
            Some(Term::seq(vec![x.proj(3), x.proj(5), x.proj(6), x.proj(7), Term::seq(vec![tok::HREF, rp_url.clone(), tok::BLANK])]))
        });
        self.exchange(&b1, &rp, &rp_domain);
        self.script(&b1, 1);
        self.exchange(&b1, &lpo, &lpo_domain);
        self.script(&b1, 2);
        self.script(&b1, 1);
        self.d.pick("rp_index.loaded.id", "no user logged in", |_, t| *t == Term::Bot);
        // The attacker page posts the CAP to the RP window as if it came from the CIF.
        self.script(&b1, 0);
        self.d.recipe("script.attacker", "login message", |ctx| {
            let x = &ctx.knowledge[0];
            let rp_window = x.proj(1).proj(2).proj(1);
            let command = Term::seq(vec![tok::POSTMESSAGE, rp_window, Term::pair(pm::LOGIN, x.proj(3)), Term::Bot]);
            Some(Term::seq(vec![x.proj(3), x.proj(5), x.proj(6), x.proj(7), command]))
        });
        self.script(&b1, 1);
        self.d.pick("rp_index.default.choice", "handlePM", |_, t| t.is_str("handlePM"));
        self.d.maybe("script.chooseinput", "login", |_, t| t.proj(4).proj(1) == pm::LOGIN);
        self.script(&b1, 1);
        self.request(&b1, &rp, &rp_domain);
    }

    /// After a CAP reached the RP page, b1 is close-corrupted and the attacker forges a CAP
    /// from the key pair left in localStorage.
    pub fn key_cleanup(&mut self) {
        let (b1, rp) = (self.browser(0), self.rp());
        let rp_domain = self.s.rps[0].domain.clone();
        let lpo_origin = browserid::lpo_origin(&self.s.lpo.server.domain);
        self.honest(Milestone::CapDelivered);
        self.corrupt(&b1, tok::CLOSECORRUPT);
        self.dump(&b1);
        let att = self.att();
        self.trigger(&att);
        self.emits(1);
        let rp_origin = netmodel::origin(rp_domain.clone(), tok::S);
        let host = rp_domain.clone();
        self.att_https(&rp, &rp_domain, "POST / with forged CAP", move |ctx, n| {
            let storage = ctx.analysis.terms().find(|t| t.items().len() == 2 && t.proj(1) == lpo_origin && !dict_get(&t.proj(2), &KEY_PAIRS).is_empty_seq())?;
            let pair = dict_get(&storage.proj(2), &KEY_PAIRS).proj(1).proj(2);
            let cap = browserid::cap(pair.proj(2), browserid::ia(rp_origin.clone(), pair.proj(1)));
            Some(HttpRequest { headers: Term::seq(vec![Term::pair(tok::ORIGIN, rp_origin.clone())]), ..post(n, host.clone(), path::ROOT, Term::Bot, cap) })
        });
        self.att_receive(&rp, 0);
    }

    /// b1 authenticates at the LPO, is close-corrupted, and the attacker reuses the surviving
    /// session cookie to obtain a UC for alice.
    pub fn cookie_cleanup(&mut self) {
        let (b1, rp, lpo, att) = (self.browser(0), self.rp(), self.lpo(), self.att());
        let rp_domain = self.s.rps[0].domain.clone();
        let lpo_domain = self.s.lpo.server.domain.clone();
        let alice = self.s.identities.iter().find(|i| i.owner == b1.pid).map(|i| i.id.clone()).expect("alice owned by b1");
        self.honest(Milestone::Authenticated);
        self.corrupt(&b1, tok::CLOSECORRUPT);
        self.dump(&b1);
        self.trigger(&att);
        self.emits(1);
        let dom = lpo_domain.clone();
        // The dumped cookie jar maps the LPO domain to its cookies.
        let cookie_sid = move |ctx: &RecipeContext<'_>| -> Option<Term> {
            let jar = ctx.analysis.terms().find(|t| t.items().len() == 2 && t.proj(1) == dom && t.proj(2).items().iter().any(|c| c.proj(1) == BROWSERID_STATE))?;
            Some(dict_get(&jar.proj(2), &BROWSERID_STATE).proj(1))
        };
        let sid_for_ctx = cookie_sid.clone();
        let host = lpo_domain.clone();
        let ctx_nonce = self.att_https(&lpo, &lpo_domain, "GET /ctx with stolen cookie", move |ctx, n| {
            Some(HttpRequest { headers: cookie_header(sid_for_ctx(ctx)?), ..get(n, host.clone(), path::CTX) })
        });
        self.att_receive(&lpo, 1);
        let user_key = self.att_nonce();
        let uk = user_key.clone();
        let host2 = lpo_domain.clone();
        let cert_nonce = self.att_https(&lpo, &lpo_domain, "POST /certreq for alice", move |ctx, n| {
            let sid = cookie_sid(ctx)?;
            let xsrf = response_body(ctx, &ctx_nonce)?.proj(2);
            Some(post(n, host2.clone(), path::CERTREQ, sid, Term::seq(vec![alice.clone(), Term::pub_key(uk.clone()), xsrf])))
        });
        self.att_receive(&lpo, 1);
        let rp_origin = netmodel::origin(rp_domain.clone(), tok::S);
        let host = rp_domain.clone();
        self.att_https(&rp, &rp_domain, "POST / with attacker CAP", move |ctx, n| {
            let uc = response_body(ctx, &cert_nonce)?;
            let cap = browserid::cap(uc, browserid::ia(rp_origin.clone(), user_key.clone()));
            Some(HttpRequest { headers: Term::seq(vec![Term::pair(tok::ORIGIN, rp_origin.clone())]), ..post(n, host.clone(), path::ROOT, Term::Bot, cap) })
        });
        self.att_receive(&rp, 0);
    }
}

fn get(nonce: Term, host: Term, p: Term) -> HttpRequest {
    HttpRequest { nonce, method: tok::GET, host, path: p, params: Term::empty(), headers: Term::empty(), body: Term::empty() }
}

fn cookie_header(sid: Term) -> Term {
    Term::seq(vec![Term::pair(tok::COOKIE, Term::seq(vec![Term::pair(BROWSERID_STATE, sid)]))])
}

/// POST carrying the session cookie unless `sid` is ⊥.
fn post(nonce: Term, host: Term, p: Term, sid: Term, body: Term) -> HttpRequest {
    let headers = if sid == Term::Bot { Term::empty() } else { cookie_header(sid) };
    HttpRequest { nonce, method: tok::POST, host, path: p, params: Term::empty(), headers, body }
}

/// Body of the decrypted response to the attacker's request `nonce`.
fn response_body(ctx: &RecipeContext<'_>, nonce: &Term) -> Option<Term> {
    ctx.analysis.terms().find(|t| t.proj(1) == tok::HTTP_RESP && t.proj(2) == *nonce).map(|t| t.proj(field::response::BODY))
}

/// Session id and xsrf token from the LPO's answer to the attacker's /ctx request.
fn session_of(ctx: &RecipeContext<'_>, nonce: &Term) -> Option<(Term, Term)> {
    let resp = ctx.analysis.terms().find(|t| t.proj(1) == tok::HTTP_RESP && t.proj(2) == *nonce)?;
    let cookies = dict_get(&resp.proj(field::response::HEADERS), &tok::SET_COOKIE);
    let sid = dict_get(&cookies, &BROWSERID_STATE).proj(1);
    Some((sid, resp.proj(field::response::BODY).proj(2)))
}

/// Guided schedules bundled with the scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Plan {
    HonestLogin,
    LoginInjection,
    KeyCleanup,
    CookieCleanup,
}

impl Plan {
    pub const ALL: [Plan; 4] = [Plan::HonestLogin, Plan::LoginInjection, Plan::KeyCleanup, Plan::CookieCleanup];

    pub fn name(self) -> &'static str {
        match self {
            Plan::HonestLogin => "honest-login",
            Plan::LoginInjection => "login-injection",
            Plan::KeyCleanup => "key-cleanup",
            Plan::CookieCleanup => "cookie-cleanup",
        }
    }

    pub fn director(self, s: &Scenario) -> Director {
        let mut p = Planner::new(s);
        match self {
            Plan::HonestLogin => p.honest(Milestone::Token),
            Plan::LoginInjection => p.login_injection(),
            Plan::KeyCleanup => p.key_cleanup(),
            Plan::CookieCleanup => p.cookie_cleanup(),
        }
        p.finish()
    }
}

/// Runs `plan` on `s` under `monitor`; the trace's schedule is the guided schedule.
pub fn record(s: &Scenario, plan: Plan, max_steps: usize, monitor: &mut dyn Monitor) -> Result<(Trace, Configuration), ScenarioError> {
    let (world, mut config) = s.build()?;
    let mut director = plan.director(s);
    let mut oracle = Oracle::new(&mut director);
    let trace = run(&world, &mut config, &mut oracle, max_steps, monitor);
    Ok((trace, config))
}
