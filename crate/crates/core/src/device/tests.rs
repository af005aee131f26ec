use super::*;
use crate::group::{Element, Scalar};
use crate::session::{Body, CommitPayload, ConfirmPayload, STATUS_ANTI_CLOGGING_TOKEN_REQUIRED, STATUS_UNKNOWN_PASSWORD_IDENTIFIER};

fn cfg(n: u8, mode: ModeFlags) -> DeviceConfig {
    let mut c = DeviceConfig::new(&format!("d{n}"), Mac::local(n), vec!["ff64".into(), "tiny23".into()], mode, n as u64);
    for peer in 1..=6u8 {
        if peer != n {
            c.store.insert(Mac::local(n), Mac::local(peer), None, "pw".into());
        }
    }
    c
}

fn dev(n: u8, mode: ModeFlags) -> Device {
    Device::new(cfg(n, mode)).unwrap()
}

fn markers(out: &[Output]) -> Vec<&Marker> {
    out.iter()
        .filter_map(|o| match o {
            Output::Marker(m) => Some(m),
            _ => None,
        })
        .collect()
}

fn has(out: &[Output], name: &str) -> bool {
    markers(out).iter().any(|m| m.name() == name)
}

fn sent(out: &[Output]) -> Vec<Frame> {
    out.iter()
        .filter_map(|o| match o {
            Output::Send(f) => Some(f.clone()),
            _ => None,
        })
        .collect()
}

/// Delivers every frame between the devices until nothing moves.
fn pump(devs: &mut [Device], mut pending: Vec<Frame>, now: &mut u64, log: &mut Vec<Output>) {
    for _ in 0..50 {
        for f in pending.drain(..) {
            if let Some(d) = devs.iter_mut().find(|d| d.mac() == f.dst) {
                d.enqueue(Input::Frame(f));
            }
        }
        for d in devs.iter_mut() {
            let out = d.dispatch(*now);
            pending.extend(sent(&out));
            log.extend(out);
        }
        *now += 1;
        if pending.is_empty() && devs.iter().all(|d| d.inbox.is_empty()) {
            return;
        }
    }
}

fn initiate(d: &mut Device, peer: u8, now: u64) -> Vec<Output> {
    d.enqueue(Input::Sme(SmeCommand::Initiate(Mac::local(peer))));
    d.dispatch_inbox(now)
}

#[test]
fn initiate_and_kill() {
    let mut d = dev(1, ModeFlags::spec2020());
    let out = initiate(&mut d, 2, 0);
    assert_eq!(d.pis.len(), 1);
    assert_eq!(d.pis[0].state, PiState::Committed);
    assert!(d.pis[0].t0.is_some());
    assert_eq!(d.open, 1);
    assert_eq!(sent(&out).len(), 1);

    let out = initiate(&mut d, 2, 0);
    assert!(has(&out, "InitiateRefused"));
    assert_eq!(d.pis.len(), 1);

    d.enqueue(Input::Sme(SmeCommand::Kill(Mac::local(2))));
    d.dispatch_inbox(0);
    assert!(d.pis.is_empty());
    assert_eq!(d.open, 0);
}

#[test]
fn honest_exchange_completes() {
    for mode in [ModeFlags::spec2020(), ModeFlags::patched()] {
        let mut devs = vec![dev(1, mode), dev(2, mode)];
        let mut now = 0;
        let mut log = initiate(&mut devs[0], 2, now);
        let first = sent(&log);
        pump(&mut devs, first, &mut now, &mut log);
        for d in &devs {
            assert_eq!(d.pis.len(), 1);
            assert_eq!(d.pis[0].state, PiState::Accepted);
            assert_eq!(d.open, 1);
        }
        let acc: Vec<_> = markers(&log).into_iter().filter(|m| m.name() == "Accepted").collect();
        assert_eq!(acc.len(), 2);
        match (acc[0], acc[1]) {
            (Marker::Accepted { sid: s1, pmk: p1, .. }, Marker::Accepted { sid: s2, pmk: p2, .. }) => {
                assert_eq!(s1, s2);
                assert_eq!(p1, p2);
            }
            _ => unreachable!(),
        }
        let auth = log.iter().any(|o| matches!(o, Output::Event { event: "Auth", to_pi: false, .. }));
        assert_eq!(auth, mode.auth_event);
    }
}

#[test]
fn simultaneous_initiation_completes() {
    let mut devs = vec![dev(1, ModeFlags::patched()), dev(2, ModeFlags::patched())];
    let mut now = 0;
    let mut log = initiate(&mut devs[0], 2, now);
    log.extend(initiate(&mut devs[1], 1, now));
    let first = sent(&log);
    pump(&mut devs, first, &mut now, &mut log);
    assert!(devs.iter().all(|d| d.pis.len() == 1 && d.pis[0].state == PiState::Accepted));
}

fn bad_commit(d: &Device) -> Frame {
    let own = d.pis[0].session.own_commit();
    Frame {
        src: d.pis[0].peer,
        dst: d.mac(),
        body: Body::Commit(CommitPayload { scalar: Some(Scalar::from_raw(1)), ..own }),
    }
}

#[test]
fn bad_commit_in_committed_sticks_without_patch() {
    let mut d = dev(1, ModeFlags::spec2020());
    initiate(&mut d, 2, 0);
    d.enqueue(Input::Frame(bad_commit(&d)));
    let out = d.dispatch_inbox(1);
    assert!(has(&out, "Unhandled"));
    let pi = &d.pis[0];
    assert_eq!(pi.state, PiState::Committed);
    assert!(pi.t0.is_none());
    assert!(pi.stuck);
    // Nothing ever fires again, and the peer is locked out.
    assert!(d.fire_due(1000).is_empty());
    assert!(has(&initiate(&mut d, 2, 2), "InitiateRefused"));
}

#[test]
fn bad_commit_in_committed_deletes_with_patch() {
    let mut d = dev(1, ModeFlags::patched());
    initiate(&mut d, 2, 0);
    d.enqueue(Input::Frame(bad_commit(&d)));
    let out = d.dispatch_inbox(1);
    assert!(!has(&out, "Unhandled"));
    assert!(has(&out, "Deleted"));
    assert!(d.pis.is_empty());
    assert_eq!(d.open, 0);
    assert!(has(&initiate(&mut d, 2, 2), "Initiated"));
    assert_eq!(d.pis[0].state, PiState::Committed);
}

fn commit_from(peer: u8, pid: Option<&str>) -> Frame {
    let mut c = cfg(peer, ModeFlags::spec2020());
    c.pid = pid.map(str::to_string);
    if let Some(p) = pid {
        c.store.insert(Mac::local(peer), Mac::local(1), Some(p), "pw".into());
    }
    let mut d = Device::new(c).unwrap();
    let out = initiate(&mut d, 1, 0);
    sent(&out).remove(0)
}

#[test]
fn unknown_identifier_stalls_without_patch() {
    let mut d = dev(1, ModeFlags::spec2020());
    d.enqueue(Input::Frame(commit_from(2, Some("ghost"))));
    let out = d.dispatch_inbox(0);
    let f = sent(&out);
    assert_eq!(f.len(), 1);
    assert_eq!(f[0].body.as_commit().unwrap().status, STATUS_UNKNOWN_PASSWORD_IDENTIFIER);
    assert_eq!(d.pis.len(), 1);
    assert_eq!(d.pis[0].state, PiState::Nothing);
    assert!(d.pis[0].bad_id);

    // A confirm now reaches the stalled instance.
    let con = Frame {
        src: Mac::local(2),
        dst: Mac::local(1),
        body: Body::Confirm(ConfirmPayload { send_confirm: 1, confirm: [0; 32] }),
    };
    d.enqueue(Input::Frame(con));
    let out = d.dispatch_inbox(1);
    assert!(has(&out, "ConToNothing"));
    assert!(has(&out, "Unhandled"));
    assert!(d.audit.con_to_nothing);
}

#[test]
fn unknown_identifier_deletes_with_patch() {
    let mut d = dev(1, ModeFlags::patched());
    d.enqueue(Input::Frame(commit_from(2, Some("ghost"))));
    let out = d.dispatch_inbox(0);
    assert_eq!(sent(&out)[0].body.as_commit().unwrap().status, STATUS_UNKNOWN_PASSWORD_IDENTIFIER);
    assert!(d.pis.is_empty());
    let con = Frame {
        src: Mac::local(2),
        dst: Mac::local(1),
        body: Body::Confirm(ConfirmPayload { send_confirm: 1, confirm: [0; 32] }),
    };
    d.enqueue(Input::Frame(con));
    let out = d.dispatch_inbox(1);
    assert!(!has(&out, "ConToNothing"));
    assert!(!d.audit.con_to_nothing);
}

#[test]
fn invalid_first_commit() {
    let mut f = commit_from(2, None);
    if let Body::Commit(c) = &mut f.body {
        c.element = Some(Element::from_raw(1));
    }
    let mut d = dev(1, ModeFlags::spec2020());
    d.enqueue(Input::Frame(f.clone()));
    d.dispatch_inbox(0);
    assert_eq!(d.pis.len(), 1);
    assert_eq!(d.pis[0].state, PiState::Nothing);

    let mut d = dev(1, ModeFlags::patched());
    d.enqueue(Input::Frame(f));
    d.dispatch_inbox(0);
    assert!(d.pis.is_empty());
}

#[test]
fn token_round_trip() {
    let d = dev(1, ModeFlags::spec2020());
    let t = d.mint_token(Mac::local(2));
    assert!(d.verify_token(Mac::local(2), &t));
    assert!(!d.verify_token(Mac::local(3), &t));
}

/// Device 1 with `threshold` open PIs toward peers 3.., then a commit from 2.
fn at_threshold(mode: ModeFlags, threshold: usize) -> (Device, Vec<Output>) {
    let mut c = cfg(1, mode);
    c.threshold = threshold;
    let mut d = Device::new(c).unwrap();
    for peer in 0..threshold as u8 {
        initiate(&mut d, 3 + peer, 0);
    }
    assert_eq!(d.open, threshold);
    d.enqueue(Input::Frame(commit_from(2, None)));
    let out = d.dispatch_inbox(0);
    (d, out)
}

#[test]
fn anti_clogging_edge() {
    let (d, out) = at_threshold(ModeFlags::spec2020(), 2);
    assert!(has(&out, "TokenlessAdmit"));
    assert!(d.audit.tokenless_admit);
    assert_eq!(d.pis.len(), 3);

    let (d, out) = at_threshold(ModeFlags::patched(), 2);
    assert!(has(&out, "TokenDemanded"));
    assert!(!d.audit.tokenless_admit);
    assert_eq!(d.pis.len(), 2);
    let reply = sent(&out);
    let c = reply[0].body.as_commit().unwrap();
    assert_eq!(c.status, STATUS_ANTI_CLOGGING_TOKEN_REQUIRED);
    assert!(d.verify_token(Mac::local(2), c.token.as_ref().unwrap()));
}

#[test]
fn token_flow_admits_second_commit() {
    let mut devs = vec![
        {
            let mut c = cfg(1, ModeFlags::patched());
            c.threshold = 1;
            let mut d = Device::new(c).unwrap();
            initiate(&mut d, 3, 0);
            d
        },
        dev(2, ModeFlags::patched()),
    ];
    let mut now = 0;
    let mut log = initiate(&mut devs[1], 1, now);
    let first = sent(&log);
    pump(&mut devs, first, &mut now, &mut log);
    assert!(has(&log, "TokenDemanded"));
    assert!(devs[1].pis[0].state == PiState::Accepted);
    assert!(!devs[0].audit.tokenless_admit);
}

#[test]
fn token_path_without_com_event() {
    let mut mode = ModeFlags::patched();
    mode.com_event_explicit = false;
    let mut c = cfg(1, mode);
    c.threshold = 1;
    let mut v = Device::new(c).unwrap();
    initiate(&mut v, 3, 0);
    let mut b = dev(2, mode);
    let mut to_v = sent(&initiate(&mut b, 1, 0));
    for _ in 0..2 {
        v.enqueue(Input::Frame(to_v.remove(0)));
        for f in sent(&v.dispatch_inbox(0)) {
            b.enqueue(Input::Frame(f));
        }
        to_v = sent(&b.dispatch_inbox(0));
    }
    let toward_b: Vec<_> = v.pis_for(Mac::local(2)).collect();
    assert_eq!(toward_b.len(), 1);
    assert_eq!(toward_b[0].state, PiState::Nothing);
    assert!(to_v.is_empty());

    // Only the peer's retransmission gets it going.
    let retx = sent(&b.fire_due(10));
    v.enqueue(Input::Frame(retx[0].clone()));
    v.dispatch_inbox(10);
    assert_eq!(v.pis_for(Mac::local(2)).next().unwrap().state, PiState::Confirmed);
}

fn confirmed_pair(mode: ModeFlags, wrong_password: bool) -> (Device, Device) {
    let mut c1 = cfg(1, mode);
    if wrong_password {
        c1.store.insert(Mac::local(1), Mac::local(2), None, "other".into());
    }
    let mut l = Device::new(c1).unwrap();
    let mut r = dev(2, mode);
    let out = initiate(&mut l, 2, 0);
    for f in sent(&out) {
        r.enqueue(Input::Frame(f));
    }
    let out = r.dispatch_inbox(0);
    // r answered with commit and confirm; hand l only the commit.
    let frames = sent(&out);
    l.enqueue(Input::Frame(frames[0].clone()));
    l.dispatch_inbox(0);
    assert_eq!(l.pis[0].state, PiState::Confirmed);
    (l, r)
}

fn confirm_from(r: &mut Device) -> Frame {
    let conf = r.pis[0].session.generate_confirm().unwrap();
    Frame { src: r.mac(), dst: Mac::local(1), body: Body::Confirm(conf) }
}

#[test]
fn good_confirm_accepts() {
    let (mut l, mut r) = confirmed_pair(ModeFlags::patched(), false);
    l.enqueue(Input::Frame(confirm_from(&mut r)));
    let out = l.dispatch_inbox(1);
    assert_eq!(l.pis[0].state, PiState::Accepted);
    assert!(l.pis[0].t0.is_none());
    assert!(has(&out, "Accepted"));
    assert!(out.iter().any(|o| matches!(o, Output::Event { event: "Auth", .. })));
}

#[test]
fn bad_auth_with_fail_event() {
    let (mut l, mut r) = confirmed_pair(ModeFlags::patched(), true);
    l.enqueue(Input::Frame(confirm_from(&mut r)));
    let out = l.dispatch_inbox(1);
    assert!(out.iter().any(|o| matches!(o, Output::Event { event: "Fail", .. })));
    assert!(l.pis.is_empty());
    assert_eq!(l.open, 0);
    // Fail is not retried.
    assert!(l.inbox.is_empty());
}

#[test]
fn bad_auth_without_patch_counts_to_big_sync() {
    let (mut l, mut r) = confirmed_pair(ModeFlags::spec2020(), true);
    for i in 1..=3 {
        l.enqueue(Input::Frame(confirm_from(&mut r)));
        l.dispatch_inbox(1);
        assert_eq!(l.pis[0].state, PiState::Confirmed);
        assert_eq!(l.pis[0].sync, i);
    }
    l.enqueue(Input::Frame(confirm_from(&mut r)));
    let out = l.dispatch_inbox(1);
    assert!(out.iter().any(|o| matches!(o, Output::Event { event: "BigSync", .. })));
    assert!(l.pis.is_empty());
    assert!(has(&out, "Retry"));
    assert_eq!(l.inbox.len(), 1);
}

#[test]
fn retries_stop_at_limit() {
    let mut l = dev(1, ModeFlags::spec2020());
    l.attempts.insert(Mac::local(2), 3);
    let (mut l2, mut r) = confirmed_pair(ModeFlags::spec2020(), true);
    l2.attempts = l.attempts.clone();
    for _ in 0..4 {
        l2.enqueue(Input::Frame(confirm_from(&mut r)));
        let out = l2.dispatch_inbox(1);
        if has(&out, "Deleted") {
            assert!(has(&out, "RetryExhausted"));
            assert!(l2.inbox.is_empty());
        }
    }
    assert!(l2.pis.is_empty());
    l = l2;
    assert_eq!(l.attempts[&Mac::local(2)], 4);
}

#[test]
fn timer_retransmits_then_gives_up() {
    let mut d = dev(1, ModeFlags::spec2020());
    let first = sent(&initiate(&mut d, 2, 0));
    for i in 1..=3 {
        let now = d.pis[0].t0.unwrap();
        let out = d.fire_due(now);
        assert_eq!(sent(&out), first, "retransmission {i} repeats the commit");
        assert_eq!(d.pis[0].sync, i);
    }
    let now = d.pis[0].t0.unwrap();
    let out = d.fire_due(now);
    assert!(has(&out, "Deleted"));
    assert!(d.pis.is_empty());
    assert_eq!(d.open, 0);
}

#[test]
fn queue_overflow_is_reported() {
    let mut c = cfg(1, ModeFlags::spec2020());
    c.queue_capacity = 1;
    let mut d = Device::new(c).unwrap();
    assert!(d.enqueue(Input::Sme(SmeCommand::Initiate(Mac::local(2)))).is_none());
    let m = d.enqueue(Input::Frame(commit_from(3, None)));
    assert_eq!(m.unwrap().name(), "Overflow");
    assert!(d.audit.overflow);

    let mut c = cfg(1, ModeFlags::spec2020());
    c.queue_capacity = 0;
    let mut d = Device::new(c).unwrap();
    assert!(d.enqueue(Input::Sme(SmeCommand::Initiate(Mac::local(2)))).is_some());
}

#[test]
fn group_offer_by_greater_identity() {
    // Device 2 prefers tiny23 and is the greater identity: it counter-offers.
    let mut c2 = cfg(2, ModeFlags::spec2020());
    c2.groups = vec!["tiny23".into(), "ff64".into()];
    let mut devs = vec![dev(1, ModeFlags::spec2020()), Device::new(c2.clone()).unwrap()];
    let mut now = 0;
    let mut log = initiate(&mut devs[0], 2, now);
    let first = sent(&log);
    pump(&mut devs, first, &mut now, &mut log);
    assert!(has(&log, "GroupOffer"));
    assert!(devs.iter().all(|d| d.pis[0].state == PiState::Accepted));
    assert!(devs.iter().all(|d| d.pis[0].session.group_label() == "tiny23"));

    // With the receiver rule it takes the offered group instead.
    let mut c2 = c2;
    c2.mode = ModeFlags::patched();
    let mut devs = vec![dev(1, ModeFlags::patched()), Device::new(c2).unwrap()];
    let mut log = initiate(&mut devs[0], 2, now);
    let first = sent(&log);
    pump(&mut devs, first, &mut now, &mut log);
    assert!(!has(&log, "GroupOffer"));
    assert!(devs.iter().all(|d| d.pis[0].session.group_label() == "ff64"));
}

#[test]
fn unsupported_group_is_refused() {
    let mut c2 = cfg(2, ModeFlags::spec2020());
    c2.groups = vec!["tiny23".into()];
    let mut devs = vec![
        {
            let mut c = cfg(1, ModeFlags::spec2020());
            c.groups = vec!["ff64".into()];
            Device::new(c).unwrap()
        },
        Device::new(c2).unwrap(),
    ];
    let mut now = 0;
    let mut log = initiate(&mut devs[0], 2, now);
    let first = sent(&log);
    pump(&mut devs, first, &mut now, &mut log);
    assert!(markers(&log).iter().any(|m| matches!(m, Marker::Rejected { reason, .. } if reason == "status 77")));
    assert!(devs.iter().all(|d| d.pis.is_empty()));
}

mod props {
    use super::*;
    use proptest::prelude::*;

    #[derive(Clone, Debug)]
    enum Op {
        Initiate(u8),
        Kill(u8),
        Honest(u8),
        BadScalar(u8),
        Identity(u8),
        UnknownPid(u8),
        Confirm(u8),
        Timer,
    }

    fn op() -> impl Strategy<Value = Op> {
        let peer = 2u8..5;
        prop_oneof![
            peer.clone().prop_map(Op::Initiate),
            peer.clone().prop_map(Op::Kill),
            peer.clone().prop_map(Op::Honest),
            peer.clone().prop_map(Op::BadScalar),
            peer.clone().prop_map(Op::Identity),
            peer.clone().prop_map(Op::UnknownPid),
            peer.prop_map(Op::Confirm),
            Just(Op::Timer),
        ]
    }

    fn input(op: &Op) -> Option<Input> {
        let frame = |peer: u8, f: &dyn Fn(&mut CommitPayload<crate::session::ConcreteSuite>)| {
            let mut fr = commit_from(peer, None);
            if let Body::Commit(c) = &mut fr.body {
                f(c);
            }
            Input::Frame(fr)
        };
        Some(match *op {
            Op::Initiate(p) => Input::Sme(SmeCommand::Initiate(Mac::local(p))),
            Op::Kill(p) => Input::Sme(SmeCommand::Kill(Mac::local(p))),
            Op::Honest(p) => frame(p, &|_| {}),
            Op::BadScalar(p) => frame(p, &|c| c.scalar = Some(Scalar::from_raw(1))),
            Op::Identity(p) => frame(p, &|c| c.element = Some(Element::from_raw(1))),
            Op::UnknownPid(p) => frame(p, &|c| c.password_id = Some("ghost".into())),
            Op::Confirm(p) => Input::Frame(Frame {
                src: Mac::local(p),
                dst: Mac::local(1),
                body: Body::Confirm(ConfirmPayload { send_confirm: 1, confirm: [0; 32] }),
            }),
            Op::Timer => return None,
        })
    }

    fn run(mode: ModeFlags, ops: &[Op]) -> Device {
        let mut c = cfg(1, mode);
        c.threshold = 2;
        let mut d = Device::new(c).unwrap();
        let mut now = 0;
        for op in ops {
            match input(op) {
                Some(i) => {
                    d.enqueue(i);
                    d.dispatch_inbox(now);
                }
                None => {
                    now += 2;
                    d.fire_due(now);
                }
            }
            assert_eq!(d.open, d.open_recount(), "after {op:?}");
            for mac in 2..5 {
                assert!(d.pis_for(Mac::local(mac)).filter(|p| p.state.in_progress()).count() <= 1);
            }
        }
        d
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn open_counter_and_single_instance(ops in proptest::collection::vec(op(), 1..24), patched: bool) {
            let mode = if patched { ModeFlags::patched() } else { ModeFlags::spec2020() };
            run(mode, &ops);
        }

        #[test]
        fn patched_handles_every_event(ops in proptest::collection::vec(op(), 1..24)) {
            let d = run(ModeFlags::patched(), &ops);
            prop_assert!(!d.audit.unhandled);
            prop_assert!(!d.audit.con_to_nothing);
            prop_assert!(d.pis.iter().all(|p| p.state != PiState::Nothing));
        }

        #[test]
        fn send_confirm_is_monotone(n in 1usize..6) {
            let (mut l, mut r) = confirmed_pair(ModeFlags::spec2020(), false);
            let mut last = l.pis[0].sc();
            for _ in 0..n {
                let Some(now) = l.pis.first().and_then(|p| p.t0) else { break };
                l.fire_due(now);
                if let Some(p) = l.pis.first() {
                    prop_assert!(p.sc() >= last);
                    last = p.sc();
                }
            }
            let _ = confirm_from(&mut r);
        }
    }
}
