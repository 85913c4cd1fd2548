//! The bundled scenario files and the plans their schedules are recorded from.

use crate::io::parse_scenario;
use crate::plans::{record, Plan};
use websym_core::oracle::Choice;
use websym_core::runtime::{NoMonitor, Status};
use websym_core::scenario::{self, Scenario};

pub const FILES: [(&str, &str); 4] = [
    ("fixed-sidp", include_str!("../scenarios/fixed-sidp.json")),
    ("attack-login-injection", include_str!("../scenarios/attack-login-injection.json")),
    ("attack-key-cleanup", include_str!("../scenarios/attack-key-cleanup.json")),
    ("attack-cookie-cleanup", include_str!("../scenarios/attack-cookie-cleanup.json")),
];

/// Steps the exploration prefix of the cookie-cleanup exploit leaves to random choices.
pub const OPEN_TAIL_STEPS: usize = 2;

pub fn scenario(name: &str) -> Option<Scenario> {
    let (_, text) = FILES.iter().find(|(n, _)| *n == name)?;
    Some(parse_scenario(text, name).expect("bundled scenarios are valid"))
}

/// Picks keep their index only, so a fix that changes a delivered message does not by itself
/// break the schedule; recipes keep the message they must derive.
fn portable(choices: Vec<Choice>) -> Vec<Choice> {
    choices
        .into_iter()
        .map(|c| if c.recipe.is_some() { c } else { Choice { value: None, ..c } })
        .collect()
}

/// Records `plan` on the schedule-free scenario `name`.
fn recorded(name: &str, plan: Plan) -> (Vec<Choice>, Vec<usize>) {
    let s = scenario::bundled(name).expect("known bundled name");
    let (trace, _) = record(&s, plan, 400, &mut NoMonitor).expect("bundled scenario builds");
    assert_eq!(trace.status, Status::Complete, "{} plan on {name} did not complete", plan.name());
    let per_step = trace.steps.iter().map(|st| st.choices.len()).collect();
    (portable(trace.schedule()), per_step)
}

/// Regenerates the bundled scenario `name` from its plans.
pub fn generate(name: &str) -> Option<Scenario> {
    let mut s = scenario::bundled(name)?;
    let schedules = match name {
        "fixed-sidp" => vec![("honest-login", recorded(name, Plan::HonestLogin).0)],
        "attack-login-injection" => vec![("exploit", recorded(name, Plan::LoginInjection).0)],
        "attack-key-cleanup" => vec![("exploit", recorded(name, Plan::KeyCleanup).0)],
        "attack-cookie-cleanup" => {
            let (exploit, per_step) = recorded(name, Plan::CookieCleanup);
            let open: usize = per_step[per_step.len() - OPEN_TAIL_STEPS..].iter().sum();
            let prefix = exploit[..exploit.len() - open].to_vec();
            vec![("exploit", exploit), ("exploit-prefix", prefix)]
        }
        _ => return None,
    };
    s.schedules = schedules.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::scenario_json;

    /// Set `WEBSYM_REGENERATE=1` to rewrite the files instead of comparing.
    #[test]
    fn bundled_files_match_their_plans() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
        for (name, text) in FILES {
            let fresh = scenario_json(&generate(name).unwrap());
            if std::env::var_os("WEBSYM_REGENERATE").is_some() {
                std::fs::write(dir.join(format!("{name}.json")), &fresh).unwrap();
            } else {
                assert!(fresh == text, "{name}.json is stale; rerun with WEBSYM_REGENERATE=1");
            }
        }
    }
}
