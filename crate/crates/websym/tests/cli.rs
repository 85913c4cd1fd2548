use serde_json::Value;
use std::path::Path;
use websym::cli::main_with;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Out {
    fn report(&self) -> Value {
        serde_json::from_str(self.stdout.lines().last().unwrap()).unwrap()
    }
}

fn websym(args: &[&str]) -> Out {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("websym").chain(args.iter().copied()).map(Into::into);
    let code = main_with(argv, &mut out, &mut err);
    Out { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn honest_schedule_runs_clean_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("honest.json");
    let run = websym(&["run", "fixed-sidp", "--schedule", "honest-login", "--out", path(&trace)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(run.report()["status"]["kind"], "complete");
    let replay = websym(&["replay", path(&trace)]);
    assert_eq!(replay.code, 0, "{}{}", replay.stdout, replay.stderr);
}

#[test]
fn exploit_exits_with_violation_and_fixed_scenario_with_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let off = dir.path().join("off.json");
    assert_eq!(websym(&["run", "attack-key-cleanup", "--schedule", "exploit", "--out", path(&off)]).code, 2);
    let on = dir.path().join("on.json");
    let fixed = websym(&["run", "attack-key-cleanup", "--schedule", "exploit", "--fix", "local-storage-cleanup=on", "--out", path(&on)]);
    assert_eq!(fixed.code, 4, "{}{}", fixed.stdout, fixed.stderr);
    // Both traces, including the infeasible one, replay from their logs.
    assert_eq!(websym(&["replay", path(&off)]).code, 0);
    assert_eq!(websym(&["replay", path(&on)]).code, 0);
}

#[test]
fn edited_trace_diverges_and_stale_scenario_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("seed.json");
    assert_eq!(websym(&["run", "fixed-sidp", "--seed", "5", "--max-steps", "20", "--out", path(&trace)]).code, 0);
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();

    let mut edited = doc.clone();
    let choice = edited["steps"][3]["choices"]
        .as_array_mut()
        .unwrap()
        .iter_mut()
        .find(|c| c["label"] == "runtime.event")
        .unwrap();
    let (index, domain) = (choice["index"].as_u64().unwrap(), choice["domain"].as_u64().unwrap());
    assert!(domain > 1);
    choice["index"] = ((index + 1) % domain).into();
    let edited_path = dir.path().join("edited.json");
    std::fs::write(&edited_path, serde_json::to_string_pretty(&edited).unwrap() + "\n").unwrap();
    let replay = websym(&["replay", path(&edited_path)]);
    assert_eq!(replay.code, 3, "{}{}", replay.stdout, replay.stderr);
    assert_eq!(replay.report()["step"], 3);

    doc["meta"]["scenario-hash"] = "0".repeat(64).into();
    let stale = dir.path().join("stale.json");
    std::fs::write(&stale, serde_json::to_string_pretty(&doc).unwrap() + "\n").unwrap();
    assert_eq!(websym(&["replay", path(&stale)]).code, 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(websym(&["run", "fixed-sidp", "--fix", "no-such-fix", "--seed", "1"]).code, 1);
    assert_eq!(websym(&["run", "no-such-scenario"]).code, 1);
    assert_eq!(websym(&["run", "fixed-sidp", "--schedule", "missing"]).code, 1);
    assert_eq!(websym(&["run", "fixed-sidp", "--schedule", "honest-login", "--seed", "1"]).code, 1);
    assert_eq!(websym(&["frobnicate"]).code, 1);
    assert_eq!(websym(&["--help"]).code, 0);
}

#[test]
fn validate_reports_the_scenario_hash() {
    let out = websym(&["validate", "attack-cookie-cleanup"]);
    assert_eq!(out.code, 0);
    let report = out.report();
    assert_eq!(report["hash"].as_str().unwrap().len(), 64);
    assert_eq!(report["schedules"].as_array().unwrap().len(), 2);
}

#[test]
fn scenario_files_load_and_report_schema_positions() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"name\": [\n}").unwrap();
    let out = websym(&["validate", "--scenario", path(&bad)]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("bad.json:2:"), "{}", out.stderr);

    let good = dir.path().join("good.json");
    std::fs::write(&good, websym::io::scenario_json(&websym::bundled::scenario("fixed-sidp").unwrap())).unwrap();
    assert_eq!(websym(&["validate", "--scenario", path(&good)]).code, 0);
}

#[test]
fn empty_exploration_reports_an_empty_summary() {
    let out = websym(&["explore", "fixed-sidp", "--runs", "0"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let summary = &out.report()["summary"];
    assert_eq!(summary["runs"], 0);
    assert_eq!(summary["violations"], 0);
    assert!(out.report().get("witness").is_none());
}

#[test]
fn prefixed_exploration_finds_the_cookie_cleanup_violation() {
    let dir = tempfile::tempdir().unwrap();
    let witness = dir.path().join("witness.json");
    let out = websym(&["explore", "attack-cookie-cleanup", "--schedule", "exploit-prefix", "--runs", "40", "--out", path(&witness)]);
    assert_eq!(out.code, 2, "{}{}", out.stdout, out.stderr);
    assert!(out.report()["summary"]["by-property"]["condition-a"].as_u64().unwrap() > 0);
    assert_eq!(websym(&["replay", path(&witness)]).code, 0);
}
