//! Adversary options in a configuration, including the finite mutation
//! grammar injections are drawn from.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::canon::classes;

use crate::group::{GroupParams, Scalar};
use crate::netsim::World;
use crate::scenarios::{ActionKind, ScriptStep};
use crate::session::{Body, Frame, Mac};

pub const BOGUS_PID: &str = "bogus-id";
pub const BOGUS_GROUP: &str = "unsupported";

fn frame_key(f: &Frame) -> (Mac, Mac, &Body) {
    (f.src, f.dst, &f.body)
}

/// Every action the adversary may take in `w`, as script steps for `round`.
/// Of old frames and values that are interchangeable only one is offered.
pub fn adversary(w: &World, round: u64, name: impl Fn(Mac) -> String) -> Vec<ScriptStep> {
    let mut out = Vec::new();
    let step = |action, tag| ScriptStep { tag: Some(tag), ..ScriptStep::new(round, action) };
    let mut seen = HashSet::new();
    for x in &w.channel.in_flight {
        if seen.insert(frame_key(&x.frame)) {
            out.push(step(ActionKind::Drop, x.tag));
        }
    }
    let classes = classes(w);
    let honest: Vec<(u32, &Frame)> = classes.frames.iter().map(|&i| (i as u32, &w.channel.history[i])).collect();
    let mut scalars = BTreeMap::new();
    let mut elements = BTreeMap::new();
    for (_, f) in &honest {
        if let Some(c) = f.body.as_commit() {
            if let Some(v) = c.scalar {
                scalars.entry(classes.value(v.value(), true)).or_insert(v.value());
            }
            if let Some(v) = c.element {
                elements.entry(classes.value(v.value(), false)).or_insert(v.value());
            }
        }
    }
    let scalars: BTreeSet<u64> = scalars.into_values().collect();
    let elements: BTreeSet<u64> = elements.into_values().collect();
    for (t, f) in &honest {
        out.push(step(ActionKind::Reflect, *t));
        for d in &w.devices {
            if d.mac() != f.src {
                out.push(ScriptStep { send_to: Some(name(d.mac())), ..step(ActionKind::Replay, *t) });
            }
        }
        for m in mutations(&f.body, &scalars, &elements) {
            out.push(step(ActionKind::Inject, *t).with(&m));
            let back = ScriptStep { send_from: Some(name(f.dst)), send_to: Some(name(f.src)), ..step(ActionKind::Inject, *t) };
            out.push(back.with(&m));
        }
    }
    out
}

/// One field rewrite of an observed frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mutation {
    Scalar(u64),
    Element(u64),
    Pid(String),
    Group(String),
    ZeroConfirm,
}

trait WithMutation {
    fn with(self, m: &Mutation) -> Self;
}

impl WithMutation for ScriptStep {
    fn with(mut self, m: &Mutation) -> Self {
        match m {
            Mutation::Scalar(v) => self.scalar = Some(v.to_string()),
            Mutation::Element(v) => self.element = Some(v.to_string()),
            Mutation::Pid(p) => self.pid = Some(p.clone()),
            Mutation::Group(g) => self.group = Some(g.clone()),
            Mutation::ZeroConfirm => self.confirm = Some(hex::encode([0u8; 32])),
        }
        self
    }
}

/// Rewrites of `body`: scalar to 1, q-1 or another observed scalar; element
/// to the identity or another observed element; an unknown identifier; an
/// unsupported group; an all-zero confirm.
pub fn mutations(body: &Body, scalars: &BTreeSet<u64>, elements: &BTreeSet<u64>) -> Vec<Mutation> {
    let mut out = Vec::new();
    match body {
        Body::Commit(c) if c.status == 0 && c.scalar.is_some() => {
            let own_s = c.scalar.map(Scalar::value);
            let own_e = c.element.map(|e| e.value());
            let mut s_alt = scalars.clone();
            let mut e_alt = elements.clone();
            if let Ok(g) = GroupParams::by_label(&c.group) {
                s_alt.extend([1, g.q() - 1]);
                e_alt.insert(g.identity().value());
            }
            out.extend(s_alt.into_iter().filter(|s| Some(*s) != own_s).map(Mutation::Scalar));
            out.extend(e_alt.into_iter().filter(|e| Some(*e) != own_e).map(Mutation::Element));
            if c.password_id.as_deref() != Some(BOGUS_PID) {
                out.push(Mutation::Pid(BOGUS_PID.into()));
            }
            out.push(Mutation::Group(BOGUS_GROUP.into()));
        }
        Body::Confirm(c) if c.confirm != [0; 32] => out.push(Mutation::ZeroConfirm),
        _ => {}
    }
    out
}
