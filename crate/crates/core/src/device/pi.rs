//! Protocol instance: one per peer exchange.

use serde::Serialize;

use super::{ConfirmOrigin, DeviceConfig, Marker};
use crate::session::{
    is_rejection, Body, CommitContext, CommitPayload, CommitVerdict, ConcreteSuite, ConfirmPayload, Mac, Reject,
    SessionState, STATUS_ANTI_CLOGGING_TOKEN_REQUIRED, STATUS_UNKNOWN_PASSWORD_IDENTIFIER,
    STATUS_UNSUPPORTED_FINITE_CYCLIC_GROUP,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PiState {
    Nothing,
    Committed,
    Confirmed,
    Accepted,
}

impl PiState {
    pub const ALL: [PiState; 4] = [PiState::Nothing, PiState::Committed, PiState::Confirmed, PiState::Accepted];

    pub fn name(self) -> &'static str {
        match self {
            PiState::Nothing => "Nothing",
            PiState::Committed => "Committed",
            PiState::Confirmed => "Confirmed",
            PiState::Accepted => "Accepted",
        }
    }

    /// Committed or Confirmed: the states limited to one instance per peer.
    pub fn in_progress(self) -> bool {
        matches!(self, PiState::Committed | PiState::Confirmed)
    }
}

/// Events exchanged between a PI and its parent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Event {
    Init,
    Com(CommitPayload<ConcreteSuite>),
    Con(ConfirmPayload<ConcreteSuite>),
    Del,
    Fail,
    Auth,
    BigSync,
    /// T0 expiry.
    Retransmit,
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::Init => "Init",
            Event::Com(_) => "Com",
            Event::Con(_) => "Con",
            Event::Del => "Del",
            Event::Fail => "Fail",
            Event::Auth => "Auth",
            Event::BigSync => "BigSync",
            Event::Retransmit => "Retransmit(T0)",
        }
    }
}

/// Result of one PI transition.
#[derive(Debug, Default)]
pub struct Step {
    /// Frames for the peer, in order.
    pub frames: Vec<Body>,
    /// Events for the parent process.
    pub events: Vec<Event>,
    pub markers: Vec<Marker>,
    pub unhandled: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pi {
    pub handle: u32,
    pub peer: Mac,
    pub state: PiState,
    pub sync: u32,
    /// Deadline of T0, if armed.
    pub t0: Option<u64>,
    pub session: SessionState<ConcreteSuite>,
    pub bad_id: bool,
    pub bad_auth: bool,
    pub big_sync: bool,
    /// Hit an event with no transition; ignores everything from now on.
    pub stuck: bool,
    /// Allocated by an SME Initiate rather than an incoming commit.
    pub initiator: bool,
    /// Nothing-state instance that already consumed its commit.
    pub consumed: bool,
    pub token: Option<Vec<u8>>,
    pub tried_groups: Vec<String>,
    pub peer_sc: Option<u16>,
    pub seed: u64,
}

/// Per-call context from the parent.
pub struct PiCtx<'a> {
    pub cfg: &'a DeviceConfig,
    pub now: u64,
}

impl<'a> PiCtx<'a> {
    fn commit_ctx(&self) -> CommitContext<'a, String> {
        CommitContext {
            mode: &self.cfg.mode,
            level: self.cfg.level,
            supported: &self.cfg.groups,
            store: &self.cfg.store,
            mesh: self.cfg.mesh,
        }
    }
}

impl Pi {
    pub fn new(handle: u32, peer: Mac, cfg: &DeviceConfig, initiator: bool) -> Pi {
        let suite = ConcreteSuite::by_label(cfg.preferred_group()).expect("config validated");
        Pi {
            handle,
            peer,
            state: PiState::Nothing,
            sync: 0,
            t0: None,
            session: SessionState::new(suite, cfg.mac, peer, cfg.pid.clone(), &cfg.name),
            bad_id: false,
            bad_auth: false,
            big_sync: false,
            stuck: false,
            initiator,
            consumed: false,
            token: None,
            tried_groups: Vec::new(),
            peer_sc: None,
            seed: mix(mix(cfg.seed) ^ handle as u64),
        }
    }

    pub fn origin(&self, confirm: [u8; 32]) -> Option<ConfirmOrigin> {
        let s = &self.session;
        let (ps, pe) = s.peer_commit.as_ref()?.values()?;
        Some(ConfirmOrigin { confirm, pwe: s.pwe?, own: (s.s_own?, s.e_own?), peer: (*ps, *pe) })
    }

    pub fn sc(&self) -> u16 {
        self.session.send_confirm
    }

    fn own(&self) -> Mac {
        self.session.own_id
    }

    fn arm(&mut self, cx: &PiCtx) {
        self.t0 = Some(cx.now + cx.cfg.t0_ticks);
    }

    fn commit_body(&self) -> Body {
        let mut c = self.session.own_commit();
        c.token = self.token.clone();
        Body::Commit(c)
    }

    fn reject(&self, out: &mut Step, reason: &str) {
        out.markers.push(Marker::Rejected { actor: self.own(), peer: self.peer, reason: reason.to_string() });
    }

    fn unhandled(&mut self, out: &mut Step, event: &Event) {
        out.unhandled = true;
        out.markers.push(Marker::Unhandled {
            actor: self.own(),
            peer: self.peer,
            state: self.state,
            event: event.name().to_string(),
        });
    }

    /// Increments sync; true (with BigSync and Del queued) once past the limit.
    fn bump_sync(&mut self, cx: &PiCtx, out: &mut Step) -> bool {
        self.sync += 1;
        if self.sync > cx.cfg.sync_limit {
            self.big_sync = true;
            self.t0 = None;
            out.events.push(Event::BigSync);
            out.events.push(Event::Del);
            true
        } else {
            false
        }
    }

    pub fn step(&mut self, ev: Event, cx: &PiCtx) -> Step {
        let mut out = Step::default();
        if self.stuck {
            self.unhandled(&mut out, &ev);
            return out;
        }
        match (self.state, ev) {
            (PiState::Nothing, Event::Init) => self.initiate(cx, &mut out),
            (PiState::Nothing, Event::Com(c)) if !self.consumed => self.first_commit(c, cx, &mut out),
            (PiState::Committed, Event::Com(c)) => self.committed_commit(c, cx, &mut out),
            // Confirm before the peer's commit: out of order, keep waiting.
            (PiState::Committed, Event::Con(_)) => {}
            (PiState::Committed, Event::Retransmit) => {
                if !self.bump_sync(cx, &mut out) {
                    out.frames.push(self.commit_body());
                    self.arm(cx);
                }
            }
            (PiState::Confirmed, Event::Con(c)) => self.confirmed_confirm(c, cx, &mut out),
            (PiState::Confirmed, Event::Com(_)) | (PiState::Confirmed, Event::Retransmit) => {
                if !self.bump_sync(cx, &mut out) {
                    out.frames.push(self.commit_body());
                    let conf = self.session.generate_confirm().expect("keys derived in Confirmed");
                    out.frames.push(Body::Confirm(conf));
                    self.arm(cx);
                }
            }
            (PiState::Accepted, Event::Con(c)) => {
                if self.bump_sync(cx, &mut out) {
                    return out;
                }
                if self.session.verify_confirm(&c).is_err() {
                    return out;
                }
                match self.peer_sc {
                    Some(seen) if c.send_confirm <= seen => {
                        let conf = self.session.generate_confirm().expect("keys derived in Accepted");
                        out.frames.push(Body::Confirm(conf));
                    }
                    _ => self.peer_sc = Some(c.send_confirm),
                }
            }
            (PiState::Accepted, Event::Com(_)) => {
                self.bump_sync(cx, &mut out);
            }
            (_, ev) => self.unhandled(&mut out, &ev),
        }
        out
    }

    fn initiate(&mut self, cx: &PiCtx, out: &mut Step) {
        match self.session.generate_commit(&cx.cfg.store, self.seed) {
            Ok(_) => {
                out.frames.push(self.commit_body());
                self.state = PiState::Committed;
                self.arm(cx);
            }
            Err(_) => {
                self.reject(out, "MissingPassword");
                out.events.push(Event::Del);
            }
        }
    }

    /// Nothing + Com: this instance answers a peer that spoke first.
    fn first_commit(&mut self, c: CommitPayload<ConcreteSuite>, cx: &PiCtx, out: &mut Step) {
        self.consumed = true;
        let cfg = cx.cfg;
        let mode = &cfg.mode;
        if is_rejection(c.status) {
            self.reject(out, &format!("status {}", c.status));
            out.events.push(Event::Del);
            return;
        }
        if !cfg.supports(&c.group) {
            out.frames.push(Body::Commit(CommitPayload::status_only(
                &c.group,
                STATUS_UNSUPPORTED_FINITE_CYCLIC_GROUP,
                None,
                None,
            )));
            self.reject(out, "BadGroup");
            out.events.push(Event::Del);
            return;
        }
        let group = if c.group == cfg.preferred_group() || mode.receiver_rule || self.own() < self.peer {
            c.group.clone()
        } else {
            cfg.preferred_group().to_string()
        };
        let own_pid = match &c.password_id {
            Some(p) if cfg.mesh && mode.mesh_no_pid => {
                self.reject(out, Reject::PidForbidden(p.clone()).code());
                self.invalid_in_nothing(cx, out);
                return;
            }
            Some(p) => {
                if !cfg.store.contains(self.own(), self.peer, Some(p)) {
                    out.frames.push(Body::Commit(CommitPayload::status_only(
                        &group,
                        STATUS_UNKNOWN_PASSWORD_IDENTIFIER,
                        Some(p.clone()),
                        None,
                    )));
                    self.bad_id = true;
                    self.reject(out, "UnknownPasswordIdentifier");
                    if mode.pid_del_patch {
                        out.events.push(Event::Del);
                    }
                    return;
                }
                Some(p.clone())
            }
            None => cfg.pid.clone(),
        };
        let suite = ConcreteSuite::by_label(&group).expect("supported group");
        self.session = SessionState::new(suite, self.own(), self.peer, own_pid, &cfg.name);
        if self.session.generate_commit(&cfg.store, self.seed).is_err() {
            self.reject(out, "MissingPassword");
            out.events.push(Event::Del);
            return;
        }
        if group != c.group {
            out.markers.push(Marker::GroupOffer {
                actor: self.own(),
                peer: self.peer,
                offered: group.clone(),
                received: c.group.clone(),
            });
        }
        match self.session.process_peer_commit(&c, &cx.commit_ctx()) {
            Err(e) => {
                self.reject(out, e.code());
                self.invalid_in_nothing(cx, out);
            }
            Ok(CommitVerdict::Wait) => {
                out.frames.push(self.commit_body());
                self.state = PiState::Committed;
                self.arm(cx);
            }
            Ok(CommitVerdict::Recommit { .. }) => {
                // Our settings came from the peer's commit, so this does not occur.
                out.frames.push(self.commit_body());
                self.state = PiState::Committed;
                self.arm(cx);
            }
            Ok(CommitVerdict::Accept { undefined_pid }) => {
                out.frames.push(self.commit_body());
                self.state = PiState::Committed;
                self.accept_commit(undefined_pid, cx, out);
            }
        }
    }

    fn invalid_in_nothing(&mut self, cx: &PiCtx, out: &mut Step) {
        if cx.cfg.mode.silent_discard_patch {
            out.events.push(Event::Del);
        }
    }

    fn invalid_in_committed(&mut self, cx: &PiCtx, out: &mut Step, event: &str) {
        if cx.cfg.mode.deadlock_patch {
            self.t0 = None;
            out.events.push(Event::Del);
        } else {
            self.stuck = true;
            out.unhandled = true;
            out.markers.push(Marker::Unhandled {
                actor: self.own(),
                peer: self.peer,
                state: self.state,
                event: event.to_string(),
            });
        }
    }

    fn committed_commit(&mut self, c: CommitPayload<ConcreteSuite>, cx: &PiCtx, out: &mut Step) {
        // T0 is off while the commit is checked.
        self.t0 = None;
        if is_rejection(c.status) {
            self.rejection_frame(c, cx, out);
            return;
        }
        let mut recommitted = false;
        loop {
            match self.session.process_peer_commit(&c, &cx.commit_ctx()) {
                Err(Reject::BadGroup(g)) => {
                    out.frames.push(Body::Commit(CommitPayload::status_only(
                        &g,
                        STATUS_UNSUPPORTED_FINITE_CYCLIC_GROUP,
                        None,
                        None,
                    )));
                    self.reject(out, "BadGroup");
                    self.arm(cx);
                }
                Err(e @ Reject::PidMismatch { .. }) => {
                    self.reject(out, e.code());
                    out.events.push(Event::Del);
                }
                Err(e) => {
                    if let Reject::UnknownPasswordIdentifier(p) = &e {
                        self.bad_id = true;
                        out.frames.push(Body::Commit(CommitPayload::status_only(
                            self.session.group_label(),
                            STATUS_UNKNOWN_PASSWORD_IDENTIFIER,
                            Some(p.clone()),
                            None,
                        )));
                    }
                    self.reject(out, e.code());
                    self.invalid_in_committed(cx, out, "Com");
                }
                Ok(CommitVerdict::Wait) => self.arm(cx),
                Ok(CommitVerdict::Recommit { group, pid }) if !recommitted => {
                    recommitted = true;
                    self.sync = 0;
                    if self.session.recommit(group.as_deref(), pid, &cx.cfg.store, self.seed).is_err() {
                        self.reject(out, "MissingPassword");
                        out.events.push(Event::Del);
                        return;
                    }
                    out.frames.push(self.commit_body());
                    self.arm(cx);
                    continue;
                }
                Ok(CommitVerdict::Recommit { .. }) => self.arm(cx),
                Ok(CommitVerdict::Accept { undefined_pid }) => self.accept_commit(undefined_pid, cx, out),
            }
            return;
        }
    }

    fn accept_commit(&mut self, undefined_pid: bool, cx: &PiCtx, out: &mut Step) {
        if undefined_pid {
            out.markers.push(Marker::UndefinedBehaviour {
                actor: self.own(),
                peer: self.peer,
                what: "different password identifiers".into(),
            });
        }
        if self.session.derive_keys().is_err() {
            self.reject(out, "Degenerate");
            self.invalid_in_committed(cx, out, "Com");
            return;
        }
        let conf = self.session.generate_confirm().expect("keys just derived");
        out.frames.push(Body::Confirm(conf));
        self.state = PiState::Confirmed;
        self.arm(cx);
        out.markers.push(Marker::BeginAuth {
            actor: self.own(),
            peer: self.peer,
            sid: self.session.session_id.clone().unwrap_or_default(),
            pmk: self.session.pmk_digest().unwrap_or_default(),
        });
    }

    /// A status frame answering our commit.
    fn rejection_frame(&mut self, c: CommitPayload<ConcreteSuite>, cx: &PiCtx, out: &mut Step) {
        match c.status {
            STATUS_ANTI_CLOGGING_TOKEN_REQUIRED if c.token.is_some() => {
                self.token = c.token;
                out.frames.push(self.commit_body());
                self.arm(cx);
            }
            STATUS_UNSUPPORTED_FINITE_CYCLIC_GROUP => {
                self.reject(out, "status 77");
                self.tried_groups.push(self.session.group_label().to_string());
                let next = cx.cfg.groups.iter().find(|g| !self.tried_groups.contains(g)).cloned();
                match next {
                    Some(g) if self.session.recommit(Some(&g), None, &cx.cfg.store, self.seed).is_ok() => {
                        out.frames.push(self.commit_body());
                        self.arm(cx);
                    }
                    _ => out.events.push(Event::Del),
                }
            }
            s => {
                if s == STATUS_UNKNOWN_PASSWORD_IDENTIFIER {
                    self.bad_id = true;
                }
                self.reject(out, &format!("status {s}"));
                out.events.push(Event::Del);
            }
        }
    }

    fn confirmed_confirm(&mut self, c: ConfirmPayload<ConcreteSuite>, cx: &PiCtx, out: &mut Step) {
        match self.session.verify_confirm(&c) {
            Ok(()) => {
                self.state = PiState::Accepted;
                self.t0 = None;
                self.peer_sc = Some(c.send_confirm);
                out.markers.push(Marker::Accepted {
                    actor: self.own(),
                    peer: self.peer,
                    sid: self.session.session_id.clone().unwrap_or_default(),
                    pmk: self.session.pmk_digest().unwrap_or_default(),
                });
                if cx.cfg.mode.auth_event {
                    out.events.push(Event::Auth);
                }
            }
            Err(_) => {
                self.bad_auth = true;
                self.reject(out, "BadAuth");
                if !self.bump_sync(cx, out) && cx.cfg.mode.fail_event_patch {
                    self.t0 = None;
                    out.events.push(Event::Fail);
                }
            }
        }
    }
}

/// splitmix64 finalizer; keeps per-PI seeds apart across devices.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
