//! Trace properties: key agreement and authentication.

use std::collections::BTreeSet;

use super::Trace;
use crate::device::Marker;
use crate::session::Mac;
use crate::verdict::PropertyResult;

/// Every accepted session is accepted by both ends with the same key, and
/// every pair that initiated ends up with at least one such session.
pub fn check_correctness(tr: &Trace) -> PropertyResult {
    let mut accepted: Vec<(Mac, Mac, &str, &str)> = Vec::new();
    let mut initiated: BTreeSet<(Mac, Mac)> = BTreeSet::new();
    for m in &tr.markers {
        match m {
            Marker::Accepted { actor, peer, sid, pmk } => accepted.push((*actor, *peer, sid, pmk)),
            Marker::Initiated { actor, peer } => {
                initiated.insert((*actor.min(peer), *actor.max(peer)));
            }
            _ => {}
        }
    }
    let mut res = PropertyResult::pass("correctness");
    if accepted.is_empty() && initiated.is_empty() {
        return res.note("vacuous: no session was started");
    }
    let mut agreed: BTreeSet<(Mac, Mac)> = BTreeSet::new();
    for &(a, b, sid, pmk) in &accepted {
        let mirrored = accepted.iter().any(|&(x, y, s, _)| x == b && y == a && s == sid);
        let same_key = accepted.iter().any(|&(x, y, s, k)| x == b && y == a && s == sid && k == pmk);
        if !mirrored {
            res = fail(res, format!("{} accepted session {sid} with {} but {} never did", tr.name(a), tr.name(b), tr.name(b)));
        } else if !same_key {
            res = fail(res, format!("session {sid}: {} and {} hold different keys", tr.name(a), tr.name(b)));
        } else {
            agreed.insert((a.min(b), a.max(b)));
        }
    }
    for (a, b) in initiated {
        if !agreed.contains(&(a, b)) {
            res = fail(res, format!("{} and {} never completed a session", tr.name(a), tr.name(b)));
        }
    }
    res
}

/// Each Accepted by A toward B consumes one earlier BeginAuth by B toward A.
/// `strong` also requires the session id and key digest to match.
pub fn check_authentication(tr: &Trace, strong: bool) -> PropertyResult {
    let name = if strong { "authentication (strong)" } else { "authentication (weak)" };
    let mut res = PropertyResult::pass(name);
    let mut begun: Vec<(Mac, Mac, &str, &str, bool)> = Vec::new();
    let mut any = false;
    for m in &tr.markers {
        match m {
            Marker::BeginAuth { actor, peer, sid, pmk } => begun.push((*actor, *peer, sid, pmk, false)),
            Marker::Accepted { actor, peer, sid, pmk } => {
                any = true;
                let slot = begun.iter_mut().find(|(x, y, s, k, used)| {
                    !*used && x == peer && y == actor && (!strong || (s == sid && k == pmk))
                });
                match slot {
                    Some(e) => e.4 = true,
                    None => {
                        res = fail(
                            res,
                            format!(
                                "{} accepted {} (session {sid}) with no matching start by {}",
                                tr.name(*actor),
                                tr.name(*peer),
                                tr.name(*peer)
                            ),
                        )
                    }
                }
            }
            _ => {}
        }
    }
    if !any {
        res = res.note("vacuous: nobody accepted");
    }
    res
}

fn fail(mut r: PropertyResult, note: String) -> PropertyResult {
    r.verdict = crate::verdict::Verdict::Fail;
    r.notes.push(note);
    r
}
