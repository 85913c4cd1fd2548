//! `websym run|explore|replay|validate`.
//!
//! Exit codes: 0 clean, 1 usage error, 2 security violation, 3 structural invariant failure or
//! replay divergence, 4 infeasible schedule. An invariant failure outranks a violation, which
//! outranks infeasibility.

use crate::exec::{self, Outcome};
use crate::explore::explore;
use crate::io::{load_scenario, scenario_hash, TraceDoc};
use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use websym_core::scenario::Scenario;

pub const TRACE_DIR_VAR: &str = "WEBSYM_TRACE_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Clean = 0,
    Usage = 1,
    Violation = 2,
    Invariant = 3,
    Infeasible = 4,
}

impl Exit {
    fn of(doc: &TraceDoc) -> Exit {
        if doc.invariant_failure() {
            Exit::Invariant
        } else if doc.security_violation() {
            Exit::Violation
        } else if doc.infeasible() {
            Exit::Infeasible
        } else {
            Exit::Clean
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "websym", version, about = "Symbolic web-model simulator and bounded checker for BrowserID")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// One run from a guided schedule or a seed; writes its trace.
    Run(RunArgs),
    /// Many seeded runs under every monitor; prints a summary.
    Explore(RunArgs),
    /// Re-executes a trace file from its logged choices.
    Replay(ReplayArgs),
    /// Loads a scenario and reports its hash.
    Validate(ScenarioArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ScenarioArgs {
    /// Bundled scenario name or scenario file.
    pub name: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub target: ScenarioArgs,
    /// Named schedule; with `explore` it becomes the prefix of every run. Guided runs default
    /// to a step bound covering the whole schedule.
    #[arg(long, value_name = "NAME")]
    pub schedule: Option<String>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "N")]
    pub max_steps: Option<usize>,
    #[arg(long, value_name = "N")]
    pub runs: Option<u64>,
    #[arg(long, value_name = "N")]
    pub recipe_depth: Option<usize>,
    /// `NAME=on|off`; a bare `NAME` turns the fix on.
    #[arg(long = "fix", value_name = "NAME=on|off")]
    pub fixes: Vec<String>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ReplayArgs {
    pub trace: PathBuf,
    /// Scenario to replay against; defaults to the bundled scenario the trace names.
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<String>,
}

/// Usage problems map to exit code 1; everything else propagates as a failure.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// A path if one exists, else a bundled scenario name.
fn resolve(name: &str) -> anyhow::Result<Scenario> {
    let path = Path::new(name);
    if path.exists() {
        return Ok(load_scenario(path)?);
    }
    crate::bundled::scenario(name).ok_or_else(|| usage(format!("no scenario file or bundled scenario named {name}")))
}

fn target(args: &ScenarioArgs) -> anyhow::Result<Scenario> {
    match (&args.scenario, &args.name) {
        (Some(p), None) | (None, Some(p)) => resolve(p),
        (Some(_), Some(_)) => Err(usage("give either a scenario name or --scenario, not both")),
        (None, None) => Err(usage("a scenario name or --scenario PATH is required")),
    }
}

fn apply_overrides(s: &mut Scenario, args: &RunArgs) -> anyhow::Result<()> {
    for spec in &args.fixes {
        let (name, on) = match spec.split_once('=') {
            None => (spec.as_str(), true),
            Some((n, "on")) => (n, true),
            Some((n, "off")) => (n, false),
            Some((_, v)) => return Err(usage(format!("fix value {v} is neither on nor off"))),
        };
        if !s.fixes.set(name, on) {
            return Err(usage(format!("unknown fix {name}; known: {}", websym_core::browserid::Fixes::NAMES.join(", "))));
        }
    }
    if let Some(n) = args.max_steps {
        s.budget.max_steps = n;
    }
    if let Some(n) = args.recipe_depth {
        s.budget.recipe_depth = n;
    }
    if let Some(n) = args.runs {
        s.budget.runs = n as usize;
    }
    Ok(())
}

fn trace_path(out: &Option<PathBuf>, file: String) -> PathBuf {
    match out {
        Some(p) => p.clone(),
        None => std::env::var_os(TRACE_DIR_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")).join(file),
    }
}

fn write_trace(path: &Path, doc: &TraceDoc) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, doc.to_json()).with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> anyhow::Result<Exit> {
    let mut s = target(&args.target)?;
    apply_overrides(&mut s, args)?;
    let (doc, file) = match (&args.schedule, args.seed) {
        (Some(_), Some(_)) => return Err(usage("--schedule and --seed are exclusive for run")),
        (Some(name), None) => {
            if args.max_steps.is_none() {
                s.budget.max_steps = exec::schedule_bound(exec::schedule(&s, name).map_err(|e| usage(e.to_string()))?);
            }
            let doc = exec::run_schedule(&s, name).map_err(|e| usage(e.to_string()))?;
            (doc, format!("{}-{name}.json", s.name))
        }
        (None, seed) => {
            let seed = seed.unwrap_or(s.seed);
            (exec::run_seed(&s, seed, 0, true)?, format!("{}-seed{seed}.json", s.name))
        }
    };
    let path = trace_path(&args.out, file);
    write_trace(&path, &doc)?;
    let violated: Vec<_> = doc.verdicts.iter().filter(|v| v.is_violated()).collect();
    let report = json!({ "scenario": s.name, "steps": doc.steps.len(), "status": doc.status, "violations": violated, "trace": path });
    writeln!(out, "{report}")?;
    Ok(Exit::of(&doc))
}

fn cmd_explore(args: &RunArgs, out: &mut dyn Write) -> anyhow::Result<Exit> {
    let mut s = target(&args.target)?;
    apply_overrides(&mut s, args)?;
    let seed = args.seed.unwrap_or(s.seed);
    let prefix = match &args.schedule {
        None => None,
        Some(name) => Some((name.as_str(), exec::schedule(&s, name).map_err(|e| usage(e.to_string()))?.to_vec())),
    };
    // The random tail keeps the full step budget beyond the prefix unless the bound is explicit.
    if let (Some((_, choices)), None) = (&prefix, args.max_steps) {
        s.budget.max_steps += exec::schedule_bound(choices);
    }
    let prefix = prefix.as_ref().map(|(n, c)| (*n, c.as_slice()));
    let result = explore(&s, seed, s.budget.runs as u64, prefix)?;
    let mut report = json!({ "scenario": s.name, "seed": seed, "summary": result.summary });
    if let Some(doc) = &result.witness {
        let path = trace_path(&args.out, format!("{}-explore-seed{seed}.json", s.name));
        write_trace(&path, doc)?;
        report["witness"] = json!(path);
    }
    writeln!(out, "{report}")?;
    Ok(if result.summary.invariant_failures > 0 {
        Exit::Invariant
    } else if result.summary.violations > 0 {
        Exit::Violation
    } else {
        Exit::Clean
    })
}

fn cmd_replay(args: &ReplayArgs, out: &mut dyn Write) -> anyhow::Result<Exit> {
    let origin = args.trace.display().to_string();
    let text = std::fs::read_to_string(&args.trace).map_err(|e| usage(format!("cannot read {origin}: {e}")))?;
    let doc = TraceDoc::parse(&text, &origin).map_err(|e| usage(e.to_string()))?;
    let s = match &args.scenario {
        Some(p) => resolve(p)?,
        None => crate::bundled::scenario(&doc.meta.scenario).ok_or_else(|| usage(format!("{} is not bundled; pass --scenario", doc.meta.scenario)))?,
    };
    let (_, outcome) = exec::replay(&s, &doc, &text).map_err(|e| match e {
        exec::ReplayError::HashMismatch { .. } => usage(e.to_string()),
        other => anyhow!(other),
    })?;
    match outcome {
        Outcome::Identical => {
            writeln!(out, "{}", json!({ "replay": "identical", "steps": doc.steps.len() }))?;
            Ok(Exit::Clean)
        }
        Outcome::Diverged { step, detail } => {
            writeln!(out, "{}", json!({ "replay": "diverged", "step": step, "detail": detail }))?;
            Ok(Exit::Invariant)
        }
    }
}

fn cmd_validate(args: &ScenarioArgs, out: &mut dyn Write) -> anyhow::Result<Exit> {
    let s = target(args)?;
    let (world, config) = s.build()?;
    let schedules: Vec<_> = s.schedules.iter().map(|(k, v)| json!({ "name": k, "choices": v.len() })).collect();
    let report = json!({
        "scenario": s.name,
        "hash": scenario_hash(&s),
        "addresses": world.addresses.len(),
        "processes": config.processes.len(),
        "fixes": s.fixes,
        "schedules": schedules,
    });
    writeln!(out, "{report}")?;
    Ok(Exit::Clean)
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<Exit> {
    match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Explore(a) => cmd_explore(a, out),
        Command::Replay(a) => cmd_replay(a, out),
        Command::Validate(a) => cmd_validate(a, out),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with(args: impl IntoIterator<Item = OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { Exit::Usage as i32 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(exit) => exit as i32,
        Err(e) => {
            // Bad input and I/O failures alike leave nothing to report but the message.
            let _ = writeln!(err, "websym: {e:#}");
            Exit::Usage as i32
        }
    }
}
