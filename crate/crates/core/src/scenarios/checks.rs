//! Named checks over a finished trace.

use serde_json::Value;

use super::model::{Scenario, ScenarioError};
use crate::device::{Marker, PiState};
use crate::netsim::{check_authentication, check_correctness, Trace};
use crate::session::{honest_exchange, Body, Frame, Mac};
use crate::terms::{check_secrecy, KnowledgeSet};

const SECRECY_DEPTH: usize = 6;

/// One expectation compared against what happened.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub check: String,
    pub expected: String,
    pub observed: String,
}

impl Outcome {
    pub fn holds(&self) -> bool {
        self.expected == self.observed
    }
}

pub fn evaluate(scn: &Scenario, tr: &Trace, check: &str) -> Result<String, ScenarioError> {
    let (head, arg) = check.split_once(':').map(|(h, a)| (h, Some(a))).unwrap_or((check, None));
    let dev = |a: Option<&str>| -> Result<Mac, ScenarioError> { scn.mac_of(a.unwrap_or_default()) };
    let b = |v: bool| v.to_string();
    Ok(match head {
        "correctness" => check_correctness(tr).verdict.to_string(),
        "auth_weak" => check_authentication(tr, false).verdict.to_string(),
        "auth_strong" => check_authentication(tr, true).verdict.to_string(),
        "accepted" => {
            let m = dev(arg)?;
            b(tr.markers.iter().any(|x| matches!(x, Marker::Accepted { actor, .. } if *actor == m)))
        }
        "rejected" => {
            let code = arg.unwrap_or_default();
            b(tr.markers.iter().any(|x| matches!(x, Marker::Rejected { reason, .. } if reason == code)))
        }
        "marker" => tr.count(arg.unwrap_or_default()).to_string(),
        "open_end" => {
            dev(arg)?;
            tr.open_of(arg.unwrap_or_default()).unwrap_or(0).to_string()
        }
        "stuck_committed" => {
            b(tr.markers.iter().any(|x| matches!(x, Marker::Stuck { state: PiState::Committed, .. })))
        }
        "initiate_refused" => b(tr.has("InitiateRefused")),
        "reinitiate_ok" => {
            let mut pairs: Vec<(Mac, Mac)> = tr
                .markers
                .iter()
                .filter_map(|x| match x {
                    Marker::Initiated { actor, peer } => Some((*actor, *peer)),
                    _ => None,
                })
                .collect();
            let n = pairs.len();
            pairs.sort();
            pairs.dedup();
            b(pairs.len() < n)
        }
        "nothing_pi_survives" => b(tr.final_state.values().any(|s| {
            s["pis"].as_array().is_some_and(|pis| pis.iter().any(|p| p["state"] == Value::from("Nothing")))
        })),
        "con_to_nothing" => b(tr.has("ConToNothing")),
        "retry_exhausted" => b(tr.has("RetryExhausted")),
        "retry_attempts" => tr
            .markers
            .iter()
            .filter_map(|x| match x {
                Marker::RetryExhausted { attempts, .. } => Some(*attempts),
                _ => None,
            })
            .max()
            .unwrap_or(0)
            .to_string(),
        "undefined_behaviour" => b(tr.has("UndefinedBehaviour")),
        "token_demanded" => b(tr.has("TokenDemanded")),
        "tokenless_admit" => b(tr.has("TokenlessAdmit")),
        "overflow" => b(tr.has("Overflow")),
        "no_group_counter_offer" => b(!tr.has("GroupOffer")),
        "downgrade_sequence" => b(downgrade_sequence(scn, tr)?),
        "halted_before_third" => {
            let (a, bob) = (scn.mac_of("alice")?, scn.mac_of("bob")?);
            let injected = injected_pid(scn, "alice")?;
            b(!tr.sent_by(a).any(|f| f.dst == bob && commit_pid(f) == injected.as_deref() && injected.is_some()))
        }
        "secrecy_pmk" | "secrecy_pwe" | "pfs_pmk" | "sanity_pmk_derivable" => secrecy(scn, head)?,
        _ => return Err(ScenarioError::Invalid(format!("unknown check `{check}`"))),
    })
}

fn commit_pid(f: &Frame) -> Option<&str> {
    match &f.body {
        Body::Commit(c) => c.password_id.as_deref(),
        _ => None,
    }
}

fn commit_group(f: &Frame) -> Option<&str> {
    match &f.body {
        Body::Commit(c) if c.status == 0 => Some(c.group.as_str()),
        _ => None,
    }
}

/// The identifier the script writes into frames from `victim`.
fn injected_pid(scn: &Scenario, victim: &str) -> Result<Option<String>, ScenarioError> {
    Ok(scn.adversary.iter().find(|a| a.from.as_deref() == Some(victim) && a.pid.is_some()).and_then(|a| a.pid.clone()))
}

/// Alice's plain commit, Mallory's rewrite, Bob's counter-offer under the
/// new identifier, Alice's re-commit with both, then confirms both ways.
fn downgrade_sequence(scn: &Scenario, tr: &Trace) -> Result<bool, ScenarioError> {
    let (a, b) = (scn.mac_of("alice")?, scn.mac_of("bob")?);
    let Some(pid) = injected_pid(scn, "alice")? else { return Ok(false) };
    let frames: Vec<(&Frame, bool)> = tr.history.iter().zip(tr.forged.iter().copied()).collect();
    let mut i = 0;
    let mut next = |pred: &dyn Fn(&Frame, bool) -> bool| -> Option<usize> {
        let at = frames[i..].iter().position(|(f, forged)| pred(f, *forged))? + i;
        i = at + 1;
        Some(at)
    };
    let is_commit = |f: &Frame| commit_group(f).is_some();
    let Some(first) = next(&|f, forged| !forged && f.src == a && f.dst == b && is_commit(f) && commit_pid(f).is_none())
    else {
        return Ok(false);
    };
    let g = commit_group(frames[first].0).unwrap_or_default().to_string();
    let steps: [&dyn Fn(&Frame, bool) -> bool; 3] = [
        &|f, forged| forged && f.dst == b && is_commit(f) && commit_pid(f) == Some(&pid),
        &|f, forged| !forged && f.src == b && f.dst == a && is_commit(f) && commit_pid(f) == Some(&pid) && commit_group(f) != Some(&g),
        &|f, forged| !forged && f.src == a && f.dst == b && is_commit(f) && commit_pid(f) == Some(&pid) && commit_group(f) != Some(&g),
    ];
    for s in steps {
        if next(s).is_none() {
            return Ok(false);
        }
    }
    let after = i;
    let confirm = |s: Mac, d: Mac| {
        frames[after..].iter().any(|(f, forged)| !forged && f.src == s && f.dst == d && matches!(f.body, Body::Confirm(_)))
    };
    Ok(confirm(a, b) && confirm(b, a))
}

fn secrecy(scn: &Scenario, which: &str) -> Result<String, ScenarioError> {
    let run = honest_exchange(&scn.mode_flags()?).map_err(ScenarioError::Invalid)?;
    let empty = KnowledgeSet::new(SECRECY_DEPTH);
    let with_pwe = KnowledgeSet::with_terms([run.pwe.clone()], SECRECY_DEPTH);
    let check = |k0: &KnowledgeSet, secret| check_secrecy(k0, &run.observed, secret, SECRECY_DEPTH);
    Ok(match which {
        "secrecy_pmk" => check(&empty, &run.pmk_l).verdict.to_string(),
        "secrecy_pwe" => check(&empty, &run.pwe).verdict.to_string(),
        "pfs_pmk" => check(&with_pwe, &run.pmk_l).verdict.to_string(),
        _ => {
            let both = KnowledgeSet::with_terms([run.pwe.clone(), run.r_l.clone()], SECRECY_DEPTH);
            (!check(&both, &run.pmk_l).is_pass()).to_string()
        }
    })
}

/// Every expectation the scenario lists for `mode`.
pub fn evaluate_all(scn: &Scenario, mode: &str, tr: &Trace) -> Result<Vec<Outcome>, ScenarioError> {
    let Some(table) = scn.expectations.get(mode) else { return Ok(Vec::new()) };
    table
        .iter()
        .map(|(check, exp)| {
            Ok(Outcome { check: check.clone(), expected: exp.render(), observed: evaluate(scn, tr, check)? })
        })
        .collect()
}
