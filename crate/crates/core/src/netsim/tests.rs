use super::*;
use crate::mode::ModeFlags;
use crate::scenarios::{library, ActionKind, ScriptStep};
use crate::session::{Body, FrameKind};
use crate::verdict::Verdict;

#[test]
fn honest_run_agrees() {
    let tr = run(&library::honest()).unwrap();
    assert!(check_correctness(&tr).is_pass());
    assert!(check_authentication(&tr, true).is_pass());
    let acc: Vec<_> = tr.markers.iter().filter(|m| m.name() == "Accepted").collect();
    assert_eq!(acc.len(), 2);
}

#[test]
fn honest_run_is_the_plain_exchange() {
    let scn = library::honest();
    let tr = run(&scn).unwrap();
    let (l, r) = (scn.mac_of("L").unwrap(), scn.mac_of("R").unwrap());
    let seq: Vec<(Mac, FrameKind)> = tr.history.iter().map(|f| (f.src, f.kind())).collect();
    assert_eq!(
        seq,
        vec![(l, FrameKind::Commit), (r, FrameKind::Commit), (r, FrameKind::Confirm), (l, FrameKind::Confirm)]
    );
    assert!(tr.forged.iter().all(|f| !f));
}

#[test]
fn runs_are_byte_identical() {
    for s in crate::scenarios::all() {
        let a = run(&s).unwrap().to_jsonl();
        let b = run(&s).unwrap().to_jsonl();
        assert_eq!(a, b, "{}", s.name);
    }
}

#[test]
fn seed_changes_the_trace() {
    let mut s = library::honest();
    let a = run(&s).unwrap().to_jsonl();
    s.seed += 1;
    assert_ne!(a, run(&s).unwrap().to_jsonl());
}

#[test]
fn steps_strictly_increase() {
    let tr = run(&library::deadlock()).unwrap();
    for w in tr.records.windows(2) {
        assert!(w[0].step < w[1].step);
        assert!(w[0].round <= w[1].round);
    }
}

#[test]
fn fresh_secret_is_not_injectable() {
    let mut s = library::honest();
    let mut inj = ScriptStep::new(1, ActionKind::Inject).select("L", "R", FrameKind::Commit);
    inj.element = Some("1234567891011".into());
    s.adversary.push(inj);
    match run(&s) {
        Err(SimError::InjectNotDerivable { round: 1, reason: NotDerivable::Value { field: "element", .. } }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn garbage_confirm_and_public_values_are_injectable() {
    let k = Knowledge::default();
    let f = |body| Frame { src: Mac::local(1), dst: Mac::local(2), body };
    use crate::group::{Element, Scalar};
    use crate::session::{CommitPayload, ConfirmPayload};
    let confirm = f(Body::Confirm(ConfirmPayload { send_confirm: 9, confirm: [0; 32] }));
    assert!(derivable(&k, &confirm).is_ok());
    let confirm = f(Body::Confirm(ConfirmPayload { send_confirm: 9, confirm: [7; 32] }));
    assert_eq!(derivable(&k, &confirm), Err(NotDerivable::Confirm));
    let mut c = CommitPayload::status_only("tiny23", 0, None, None);
    c.scalar = Some(Scalar::from_raw(10));
    c.element = Some(Element::from_raw(22));
    assert!(derivable(&k, &f(Body::Commit(c.clone()))).is_ok());
    c.token = Some(vec![1, 2, 3]);
    assert_eq!(derivable(&k, &f(Body::Commit(c))), Err(NotDerivable::Token));
}


#[test]
fn unilateral_accept_fails_correctness_with_diagnosis() {
    let tr = run(&library::reflection()).unwrap();
    let r = check_correctness(&tr);
    assert_eq!(r.verdict, Verdict::Fail);
    assert!(r.notes.iter().any(|n| n.contains("never did")), "{:?}", r.notes);
}

#[test]
fn patched_reflection_is_vacuous_for_authentication() {
    let s = library::reflection().with_mode(ModeFlags::patched());
    let r = check_authentication(&run(&s).unwrap(), false);
    assert!(r.is_pass());
    assert!(r.notes.iter().any(|n| n.contains("vacuous")));
}

#[test]
fn no_session_is_vacuous() {
    let mut s = library::honest();
    s.sme.clear();
    let tr = run(&s).unwrap();
    let r = check_correctness(&tr);
    assert!(r.is_pass() && r.notes[0].contains("vacuous"));
}

#[test]
fn unmatched_selector_is_a_noop_note() {
    let mut s = library::honest();
    s.adversary.push(ScriptStep::new(0, ActionKind::Drop).select("R", "L", FrameKind::Confirm));
    let tr = run(&s).unwrap();
    assert!(tr.records.iter().any(|r| r.actor == "adversary" && r.payload["action"] == "noop"));
    assert!(check_correctness(&tr).is_pass());
}

#[test]
fn replay_to_a_third_party() {
    let mut s = library::anti_clogging_edge();
    s.adversary.clear();
    let mut rep = ScriptStep::new(2, ActionKind::Replay).select("V", "A", FrameKind::Commit);
    rep.send_to = Some("B".into());
    s.adversary.push(rep);
    let tr = run(&s).unwrap();
    let (v, b) = (s.mac_of("V").unwrap(), s.mac_of("B").unwrap());
    let i = tr.forged.iter().position(|f| *f).expect("one forged frame");
    assert_eq!((tr.history[i].src, tr.history[i].dst), (v, b));
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn honest_runs_agree_for_any_seed(seed in any::<u32>(), patched: bool) {
            let mut s = library::honest();
            s.seed = seed as u64;
            if patched {
                s.set_mode(ModeFlags::patched());
            }
            let tr = run(&s).unwrap();
            prop_assert!(check_correctness(&tr).is_pass());
            prop_assert!(check_authentication(&tr, true).is_pass());
        }

        /// Every forged frame only carries values seen earlier or public ones.
        #[test]
        fn forged_frames_are_derivable(seed in any::<u32>(), pick in 0usize..8) {
            let mut s = crate::scenarios::all()[pick % 8].clone();
            s.seed = seed as u64;
            let tr = run(&s).unwrap();
            for (i, f) in tr.history.iter().enumerate() {
                if tr.forged[i] {
                    let k = Knowledge::observe(&tr.history[..i]);
                    prop_assert!(derivable(&k, f).is_ok(), "frame {} {:?}", i, f);
                }
            }
        }
    }
}
