//! Canonical 128-bit fingerprints of global configurations.
//!
//! Fresh scalars and elements only matter through equalities, so they are
//! renamed in order of first appearance: devices and their PIs in order,
//! then in-flight frames. Small values and q-1 stay as they are. A confirm
//! is keyed by the commits it covers, recorded when it was sent, or marked
//! dead once no live PI owns the commit it answers. Per-PI seeds and the
//! handle counter only feed future fresh values and are left out, as are
//! the clock (timer deadlines count relative to now) and tags.
//!
//! Honest history is the adversary's knowledge. Frames touching a live value
//! are renamed with everything else. The rest are grouped by value pair and
//! each group shape counts at most `cap` times: the adversary never uses more
//! old frames than it has actions.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::hash::{DefaultHasher, Hash, Hasher};

use crate::device::{ConfirmOrigin, Device, Input, Pi};
use crate::group::{Element, GroupParams, Scalar};
use crate::netsim::World;
use crate::session::{Body, Frame};

/// Two independent SipHash streams fed the same bytes.
struct Wide(DefaultHasher, DefaultHasher);

impl Wide {
    fn new() -> Self {
        let mut b = DefaultHasher::new();
        0x5AEu64.hash(&mut b);
        Wide(DefaultHasher::new(), b)
    }
    fn finish128(&self) -> u128 {
        ((self.0.finish() as u128) << 64) | self.1.finish() as u128
    }
}

impl Hasher for Wide {
    fn write(&mut self, bytes: &[u8]) {
        self.0.write(bytes);
        self.1.write(bytes);
    }
    fn finish(&self) -> u64 {
        self.0.finish()
    }
}

fn h64<T: Hash + ?Sized>(v: &T) -> u64 {
    let mut h = DefaultHasher::new();
    v.hash(&mut h);
    h.finish()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Val {
    Raw(u64),
    Fresh(u32),
}

/// Values worth renaming: too large for the toy group, and not the largest
/// scalar of the real one.
fn generic(v: u64, scalar: bool) -> bool {
    v > 22 && !(scalar && v == GroupParams::ff64().q() - 1)
}

#[derive(Default)]
struct Names {
    scalars: HashMap<u64, u32>,
    elements: HashMap<u64, u32>,
}

impl Names {
    fn name(&mut self, v: u64, scalar: bool) -> Val {
        if !generic(v, scalar) {
            return Val::Raw(v);
        }
        let map = if scalar { &mut self.scalars } else { &mut self.elements };
        let n = map.len() as u32;
        Val::Fresh(*map.entry(v).or_insert(n))
    }
    fn s(&mut self, v: Scalar) -> Val {
        self.name(v.value(), true)
    }
    fn e(&mut self, v: Element) -> Val {
        self.name(v.value(), false)
    }
    fn known(&self, v: u64, scalar: bool) -> bool {
        !generic(v, scalar) || if scalar { self.scalars.contains_key(&v) } else { self.elements.contains_key(&v) }
    }
}

struct Canon<'a> {
    w: &'a World,
    names: Names,
    /// Own commit values of every live PI.
    owners: HashSet<(u64, u64)>,
}

impl<'a> Canon<'a> {
    fn origin(&self, confirm: &[u8; 32]) -> Option<&'a ConfirmOrigin> {
        self.w.channel.origins.get(confirm)
    }

    /// A confirm can still verify only at the PI whose commit it answers.
    fn live_origin(&self, o: &ConfirmOrigin) -> bool {
        self.owners.contains(&(o.peer.0.value(), o.peer.1.value()))
    }

    fn frame<H: Hasher>(&mut self, f: &Frame, h: &mut H) {
        (f.src, f.dst).hash(h);
        match &f.body {
            Body::Commit(c) => {
                (0u8, &c.group, &c.password_id, &c.token, c.status).hash(h);
                c.scalar.map(|v| self.names.s(v)).hash(h);
                c.element.map(|v| self.names.e(v)).hash(h);
            }
            Body::Confirm(c) => {
                (1u8, c.send_confirm).hash(h);
                if c.confirm == [0; 32] {
                    0u8.hash(h);
                } else if let Some(o) = self.origin(&c.confirm) {
                    if self.live_origin(o) {
                        1u8.hash(h);
                        o.pwe.hash(h);
                        (self.names.s(o.own.0), self.names.e(o.own.1)).hash(h);
                        (self.names.s(o.peer.0), self.names.e(o.peer.1)).hash(h);
                    } else {
                        2u8.hash(h);
                    }
                } else {
                    (3u8, c.confirm).hash(h);
                }
            }
        }
    }

    fn pi<H: Hasher>(&mut self, now: u64, p: &Pi, h: &mut H) {
        p.peer.hash(h);
        p.state.hash(h);
        p.sync.hash(h);
        p.t0.map(|d| d.saturating_sub(now)).hash(h);
        (p.bad_id, p.bad_auth, p.big_sync, p.stuck, p.initiator, p.consumed).hash(h);
        p.token.hash(h);
        p.tried_groups.hash(h);
        p.peer_sc.hash(h);
        let s = &p.session;
        (s.phase, s.send_confirm, &s.own_pid, s.pwe).hash(h);
        (s.r.is_some(), s.kc.is_some(), s.pmk.is_some()).hash(h);
        s.s_own.map(|v| self.names.s(v)).hash(h);
        s.e_own.map(|v| self.names.e(v)).hash(h);
        match &s.peer_commit {
            Some(c) => {
                (1u8, &c.group, &c.password_id, &c.token, c.status).hash(h);
                c.scalar.map(|v| self.names.s(v)).hash(h);
                c.element.map(|v| self.names.e(v)).hash(h);
            }
            None => 0u8.hash(h),
        }
    }

    fn device<H: Hasher>(&mut self, d: &Device, h: &mut H) {
        (d.open, &d.attempts, d.audit, d.pis.len()).hash(h);
        for p in &d.pis {
            self.pi(self.w.now, p, h);
        }
        d.inbox.len().hash(h);
        for i in &d.inbox {
            match i {
                Input::Frame(f) => self.frame(f, h),
                other => other.hash(h),
            }
        }
    }

    /// Whether an old frame shares a value with the live configuration.
    fn touches(&self, f: &Frame) -> bool {
        match &f.body {
            Body::Commit(c) => {
                c.scalar.is_some_and(|v| generic(v.value(), true) && self.names.known(v.value(), true))
                    || c.element.is_some_and(|v| generic(v.value(), false) && self.names.known(v.value(), false))
            }
            Body::Confirm(c) => self.origin(&c.confirm).is_some_and(|o| self.live_origin(o)),
        }
    }

    /// Shape of a frame with no live values; the values stay out.
    fn dead_shape(f: &Frame) -> u64 {
        let mut h = DefaultHasher::new();
        (f.src, f.dst).hash(&mut h);
        match &f.body {
            Body::Commit(c) => (0u8, &c.group, &c.password_id, &c.token, c.status).hash(&mut h),
            Body::Confirm(c) => (1u8, c.send_confirm, c.confirm == [0; 32]).hash(&mut h),
        }
        h.finish()
    }

    fn knowledge(&mut self) -> Knowledge {
        let ch = &self.w.channel;
        let mut seen = HashSet::new();
        let mut k = Knowledge::default();
        let mut groups: BTreeMap<(u64, u64), Vec<(usize, u64)>> = BTreeMap::new();
        for (i, (f, forged)) in ch.history.iter().zip(&ch.forged).enumerate() {
            if *forged || !seen.insert(f) {
                continue;
            }
            if self.touches(f) {
                let mut fh = DefaultHasher::new();
                self.frame(f, &mut fh);
                let c = fh.finish();
                k.live.push(c);
                k.frames.push((i, c));
                continue;
            }
            let c = match &f.body {
                Body::Commit(c) => match (c.scalar, c.element) {
                    (Some(s), Some(e)) if generic(s.value(), true) && generic(e.value(), false) => {
                        groups.entry((s.value(), e.value())).or_default().push((i, Self::dead_shape(f)));
                        continue;
                    }
                    _ => h64(&(Self::dead_shape(f), c.scalar, c.element)),
                },
                Body::Confirm(_) => Self::dead_shape(f),
            };
            *k.counts.entry(c).or_default() += 1;
            k.frames.push((i, c));
        }
        for ((s, e), mut g) in groups {
            g.sort_unstable_by_key(|x| x.1);
            let gh = h64(&g.iter().map(|x| x.1).collect::<Vec<_>>());
            *k.counts.entry(gh).or_default() += 1;
            k.frames.extend(g.iter().map(|&(i, shape)| (i, h64(&(gh, shape)))));
            k.values.insert((true, s), h64(&(gh, 's')));
            k.values.insert((false, e), h64(&(gh, 'e')));
        }
        k.live.sort_unstable();
        k
    }

    fn finish(mut self, cap: usize, extra: &[u64]) -> u128 {
        let mut h = Wide::new();
        for d in &self.w.devices {
            self.device(d, &mut h);
        }
        self.w.channel.in_flight.len().hash(&mut h);
        for x in &self.w.channel.in_flight {
            self.frame(&x.frame, &mut h);
        }
        let k = self.knowledge();
        k.live.hash(&mut h);
        for (c, n) in k.counts {
            (c, n.min(cap)).hash(&mut h);
        }
        extra.hash(&mut h);
        h.finish128()
    }
}

#[derive(Default)]
struct Knowledge {
    live: Vec<u64>,
    counts: BTreeMap<u64, usize>,
    /// Class of each distinct honest frame, by history index.
    frames: Vec<(usize, u64)>,
    /// Class of each value that only occurs in dead frames.
    values: HashMap<(bool, u64), u64>,
}

/// Interchangeability classes of what the adversary knows: frames with
/// equal class lead to configurations with equal fingerprints, and so do
/// values. `frames` lists one honest history index per frame class.
pub struct Classes {
    pub frames: Vec<usize>,
    names: Names,
    dead: HashMap<(bool, u64), u64>,
}

impl Classes {
    pub fn value(&self, v: u64, scalar: bool) -> u64 {
        if let Some(c) = self.dead.get(&(scalar, v)) {
            return *c;
        }
        let map = if scalar { &self.names.scalars } else { &self.names.elements };
        match map.get(&v) {
            Some(n) if generic(v, scalar) => h64(&(scalar, Val::Fresh(*n))),
            _ => h64(&(scalar, Val::Raw(v))),
        }
    }
}

fn canon(w: &World) -> Canon<'_> {
    let mut owners = HashSet::new();
    for d in &w.devices {
        for p in &d.pis {
            if let (Some(s), Some(e)) = (p.session.s_own, p.session.e_own) {
                owners.insert((s.value(), e.value()));
            }
        }
    }
    Canon { w, names: Names::default(), owners }
}

pub fn classes(w: &World) -> Classes {
    let mut c = canon(w);
    let mut sink = DefaultHasher::new();
    for d in &w.devices {
        c.device(d, &mut sink);
    }
    for x in &w.channel.in_flight {
        c.frame(&x.frame, &mut sink);
    }
    let k = c.knowledge();
    let mut seen = HashSet::new();
    let mut frames: Vec<(usize, u64)> = k.frames;
    frames.sort_unstable();
    let frames = frames.into_iter().filter(|(_, cl)| seen.insert(*cl)).map(|(i, _)| i).collect();
    Classes { frames, names: c.names, dead: k.values }
}

/// Fingerprint of `w` plus explorer bookkeeping (`extra`). Interchangeable
/// old frames are told apart up to `cap` copies.
pub fn fingerprint(w: &World, extra: &[u64], cap: usize) -> u128 {
    canon(w).finish(cap, extra)
}
