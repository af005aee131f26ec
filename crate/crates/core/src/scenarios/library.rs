//! Built-in scenarios, each with its expected outcome per mode.

use super::model::{ActionKind, DeviceSpec, PasswordSpec, Scenario, ScriptStep};
use crate::group::{FF64, TINY23};
use crate::mode::Level;
use crate::session::FrameKind::{Commit, Confirm};

const SPEC: &str = "spec2020";
const PATCHED: &str = "patched";
const BOTH: [&str; 2] = [SPEC, PATCHED];

fn pair(a: &str, b: &str) -> Vec<DeviceSpec> {
    vec![DeviceSpec::new(a, 1), DeviceSpec::new(b, 2)]
}

fn step(round: u64, action: ActionKind) -> ScriptStep {
    ScriptStep::new(round, action)
}

/// Plain two-party run with a passive channel.
pub fn honest() -> Scenario {
    let mut s = Scenario::new("honest", "two stations, passive channel", pair("L", "R"));
    s.initiate(0, "L", "R");
    for m in BOTH {
        s.expect(m, "correctness", "PASS")
            .expect(m, "auth_weak", "PASS")
            .expect(m, "auth_strong", "PASS")
            .expect(m, "accepted:L", true)
            .expect(m, "accepted:R", true)
            .expect(m, "open_end:L", 1);
    }
    s
}

/// L's commit and confirm are intercepted and bounced back to it as if from R.
pub fn reflection() -> Scenario {
    let mut s = Scenario::new("reflection", "L is handed its own commit and confirm, posing as R", pair("L", "R"));
    s.initiate(0, "L", "R");
    s.adversary = vec![
        step(1, ActionKind::Drop).select("L", "R", Commit),
        step(1, ActionKind::Reflect).select("L", "R", Commit),
        step(2, ActionKind::Drop).select("L", "R", Confirm),
        step(2, ActionKind::Reflect).select("L", "R", Confirm),
    ];
    s.expect(SPEC, "accepted:L", true)
        .expect(SPEC, "auth_weak", "FAIL")
        .expect(SPEC, "auth_strong", "FAIL")
        .expect(SPEC, "correctness", "FAIL")
        .expect(SPEC, "rejected:Reflected", false);
    s.expect(PATCHED, "accepted:L", false)
        .expect(PATCHED, "auth_weak", "PASS")
        .expect(PATCHED, "rejected:Reflected", true)
        .expect(PATCHED, "marker:Accepted", 0);
    s
}

/// Same stations as `reflection`, adversary passive.
pub fn reflection_control() -> Scenario {
    let mut s = honest();
    s.name = "reflection_control".into();
    s.description = "control for reflection: nobody interferes".into();
    s
}

fn bad_commit(round: u64, victim: &str, posing_as: &str) -> Vec<ScriptStep> {
    let mut inject = step(round, ActionKind::Inject);
    inject.from = Some(victim.into());
    inject.to = Some(posing_as.into());
    inject.kind = Some(Commit);
    inject.send_from = Some(posing_as.into());
    inject.send_to = Some(victim.into());
    inject.scalar = Some("1".into());
    inject.element = Some("gen".into());
    vec![step(round, ActionKind::Drop).select(victim, posing_as, Commit), inject]
}

/// A commit with scalar 1 reaches L while it waits in Committed; L later retries.
pub fn deadlock() -> Scenario {
    let mut s = Scenario::new("deadlock", "out-of-range scalar to a Committed instance, then a fresh Initiate", pair("L", "R"));
    s.initiate(0, "L", "R").initiate(6, "L", "R");
    s.adversary = bad_commit(1, "L", "R");
    s.expect(SPEC, "stuck_committed", true)
        .expect(SPEC, "initiate_refused", true)
        .expect(SPEC, "reinitiate_ok", false)
        .expect(SPEC, "accepted:L", false)
        .expect(SPEC, "open_end:L", 1);
    s.expect(PATCHED, "stuck_committed", false)
        .expect(PATCHED, "initiate_refused", false)
        .expect(PATCHED, "reinitiate_ok", true)
        .expect(PATCHED, "accepted:L", true)
        .expect(PATCHED, "correctness", "PASS");
    s
}

/// One victim, five peers, each handshake poisoned the same way.
pub fn deadlock_drain() -> Scenario {
    let mut devices = vec![DeviceSpec::new("V", 1)];
    for i in 1..=5u8 {
        devices.push(DeviceSpec::new(&format!("P{i}"), i + 1));
    }
    let mut s = Scenario::new("deadlock_drain", "stuck instances pile up on one victim", devices);
    for i in 1..=5 {
        let p = format!("P{i}");
        s.initiate(0, "V", &p);
        s.adversary.extend(bad_commit(1, "V", &p));
    }
    s.expect(SPEC, "open_end:V", 5).expect(SPEC, "marker:Stuck", 5).expect(SPEC, "stuck_committed", true);
    s.expect(PATCHED, "open_end:V", 0).expect(PATCHED, "marker:Stuck", 0).expect(PATCHED, "stuck_committed", false);
    s
}

pub const PID_CELLS: [&str; 4] = ["omit_omit", "set_omit", "omit_set", "set_set"];

/// One cell of the identifier matrix: both stations start at once.
pub fn pid_cell(cell: &str, same: bool) -> Scenario {
    let (pa, pb) = match cell {
        "omit_omit" => (None, None),
        "set_omit" => (Some("alpha"), None),
        "omit_set" => (None, Some("alpha")),
        _ => (Some("alpha"), if same { Some("alpha") } else { Some("beta") }),
    };
    let row = if same { "same" } else { "different" };
    let mut devices = pair("A", "B");
    for (d, own, peer) in devices.iter_mut().zip([(pa, "B"), (pb, "A")]).map(|(d, (o, p))| (d, o, p)) {
        d.pid = own.map(str::to_string);
        d.password = None;
        // "same": one password behind every entry; "different": one per identifier.
        let default_pw = if same { "shared".to_string() } else { format!("default-{}", d.name) };
        d.passwords.push(PasswordSpec { peer: peer.into(), pid: None, password: default_pw });
        for id in ["alpha", "beta"] {
            let pw = if same { "shared".to_string() } else { format!("pw-{id}") };
            d.passwords.push(PasswordSpec { peer: peer.into(), pid: Some(id.into()), password: pw });
        }
    }
    let name = format!("pid_{cell}_{row}");
    let mut s = Scenario::new(&name, &format!("identifiers {cell}, {row} password per identifier"), devices);
    s.rounds = 200;
    s.findings = vec!["correctness".into()];
    s.initiate(0, "A", "B").initiate(0, "B", "A");
    let succeeds = !((cell == "omit_omit" || cell == "set_set") && !same);
    s.expect(PATCHED, "correctness", if succeeds { "PASS" } else { "FAIL" });
    if cell == "set_set" && !same {
        s.expect(PATCHED, "retry_exhausted", false).expect(PATCHED, "rejected:PidMismatch", true);
        s.expect(SPEC, "correctness", "FAIL")
            .expect(SPEC, "undefined_behaviour", true)
            .expect(SPEC, "retry_exhausted", true)
            .expect(SPEC, "retry_attempts", 4);
    } else {
        // Literal rules never renegotiate, and the identifier feeds the
        // password element, so only matching settings agree.
        let literal_ok = pa == pb && succeeds;
        s.expect(SPEC, "correctness", if literal_ok { "PASS" } else { "FAIL" });
    }
    s
}

pub fn pid_matrix() -> Vec<Scenario> {
    [true, false].into_iter().flat_map(|same| PID_CELLS.map(|c| pid_cell(c, same))).collect()
}

/// Alice asks for an identifier Bob has never heard of; a stray confirm follows.
pub fn pid_stall() -> Scenario {
    let mut devices = pair("alice", "bob");
    devices[0].pid = Some("ghost".into());
    devices[0].password = None;
    devices[0].passwords.push(PasswordSpec { peer: "bob".into(), pid: Some("ghost".into()), password: "boo".into() });
    let mut s = Scenario::new("pid_stall", "unknown password identifier, then a confirm to the stalled instance", devices);
    s.initiate(0, "alice", "bob");
    let mut con = step(3, ActionKind::Inject);
    con.send_from = Some("alice".into());
    con.send_to = Some("bob".into());
    con.sc = Some(1);
    s.adversary.push(con);
    s.expect(SPEC, "nothing_pi_survives", true).expect(SPEC, "con_to_nothing", true).expect(SPEC, "rejected:status 123", true);
    s.expect(PATCHED, "nothing_pi_survives", false).expect(PATCHED, "con_to_nothing", false).expect(PATCHED, "rejected:status 123", true);
    s
}

fn downgrade_base(name: &str, level: Level) -> Scenario {
    let mut devices = pair("alice", "bob");
    devices[0].groups = vec![TINY23.into(), FF64.into()];
    devices[0].password = None;
    devices[0].passwords = vec![
        PasswordSpec { peer: "bob".into(), pid: None, password: "alice-default".into() },
        PasswordSpec { peer: "bob".into(), pid: Some("guest".into()), password: "guest-pass".into() },
    ];
    devices[1].groups = vec![FF64.into(), TINY23.into()];
    devices[1].password = None;
    devices[1].passwords =
        vec![PasswordSpec { peer: "alice".into(), pid: Some("guest".into()), password: "guest-pass".into() }];
    let mut s = Scenario::new(name, "Mallory writes an identifier into Alice's first commit", devices);
    s.level = level;
    s.initiate(0, "alice", "bob");
    let mut inject = step(1, ActionKind::Inject).select("alice", "bob", Commit);
    inject.pid = Some("guest".into());
    s.adversary = vec![step(1, ActionKind::Drop).select("alice", "bob", Commit), inject];
    s
}

/// Message-level rules: the rewritten identifier sticks and the run completes.
pub fn downgrade_comm() -> Scenario {
    let mut s = downgrade_base("downgrade_comm", Level::Communication);
    s.expect(SPEC, "downgrade_sequence", true).expect(SPEC, "halted_before_third", false).expect(SPEC, "correctness", "PASS");
    s.expect(PATCHED, "downgrade_sequence", false).expect(PATCHED, "no_group_counter_offer", true);
    s
}

/// State-machine rules: Alice never re-commits under the injected identifier.
pub fn downgrade() -> Scenario {
    let mut s = downgrade_base("downgrade", Level::Device);
    s.expect(SPEC, "halted_before_third", true).expect(SPEC, "downgrade_sequence", false);
    s.expect("spec2020+receiver_rule", "no_group_counter_offer", true).expect("spec2020+receiver_rule", "downgrade_sequence", false);
    s.expect(PATCHED, "no_group_counter_offer", true).expect(PATCHED, "downgrade_sequence", false);
    s
}

/// Threshold 1: V has one open instance when B's token-less commit lands.
pub fn anti_clogging_edge() -> Scenario {
    let mut devices = vec![DeviceSpec::new("V", 1), DeviceSpec::new("A", 2), DeviceSpec::new("B", 3)];
    devices[0].threshold = Some(1);
    let mut s = Scenario::new("anti_clogging_edge", "a commit arrives exactly at the anti-clogging threshold", devices);
    s.initiate(0, "V", "A").initiate(0, "B", "V");
    s.adversary = vec![step(1, ActionKind::Drop).select("V", "A", Commit)];
    s.expect(SPEC, "tokenless_admit", true).expect(SPEC, "token_demanded", false);
    s.expect(PATCHED, "tokenless_admit", false).expect(PATCHED, "token_demanded", true).expect(PATCHED, "accepted:B", true);
    s
}

/// V's inbox holds one input; an SME command and a commit arrive together.
pub fn queue_overflow() -> Scenario {
    let mut devices = pair("V", "A");
    devices[0].queue_capacity = Some(1);
    let mut s = Scenario::new("queue_overflow", "two inputs reach a one-slot queue in the same round", devices);
    s.initiate(0, "A", "V").initiate(1, "V", "A");
    for m in BOTH {
        s.expect(m, "overflow", true);
    }
    s
}

/// Honest run plus symbolic secrecy and forward secrecy checks.
pub fn secrecy_pfs() -> Scenario {
    let mut s = Scenario::new("secrecy_pfs", "key secrecy and forward secrecy of an honest run", pair("L", "R"));
    s.initiate(0, "L", "R");
    for m in BOTH {
        s.expect(m, "correctness", "PASS")
            .expect(m, "secrecy_pmk", "PASS")
            .expect(m, "secrecy_pwe", "PASS")
            .expect(m, "pfs_pmk", "PASS")
            .expect(m, "sanity_pmk_derivable", true);
    }
    s
}

/// Every built-in scenario, in a stable order.
pub fn all() -> Vec<Scenario> {
    let mut v = vec![
        honest(),
        reflection(),
        reflection_control(),
        deadlock(),
        deadlock_drain(),
        pid_stall(),
        downgrade_comm(),
        downgrade(),
        anti_clogging_edge(),
        queue_overflow(),
        secrecy_pfs(),
    ];
    v.extend(pid_matrix());
    v
}

pub fn by_name(name: &str) -> Option<Scenario> {
    all().into_iter().find(|s| s.name == name)
}

/// Names that stand for several scenarios.
pub fn family(name: &str) -> Option<Vec<Scenario>> {
    match name {
        "pid_matrix" => Some(pid_matrix()),
        _ => by_name(name).map(|s| vec![s]),
    }
}
