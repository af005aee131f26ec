//! Peer logic of the commit/confirm exchange, generic over a crypto suite.
//!
//! [`ConcreteSuite`] computes in a finite-field group; [`SymbolicSuite`]
//! builds terms so the same code path feeds the deduction engine.

mod concrete;
mod ident;
mod symbolic;
mod wire;

use std::collections::BTreeMap;
use std::fmt;
use std::hash::Hash;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mode::{Level, ModeFlags};

pub use concrete::ConcreteSuite;
pub(crate) use concrete::hmac;
pub use ident::Mac;
pub use symbolic::{honest_exchange, SymbolicRun, SymbolicSuite};
pub use wire::{Body, Frame, FrameKind, WireError};

pub const STATUS_SUCCESS: u16 = 0;
pub const STATUS_ANTI_CLOGGING_TOKEN_REQUIRED: u16 = 76;
pub const STATUS_UNSUPPORTED_FINITE_CYCLIC_GROUP: u16 = 77;
pub const STATUS_UNKNOWN_PASSWORD_IDENTIFIER: u16 = 123;
pub const STATUS_SAE_HASH_TO_ELEMENT: u16 = 126;

/// True for statuses that reject the exchange.
pub fn is_rejection(status: u16) -> bool {
    status != STATUS_SUCCESS && status != STATUS_SAE_HASH_TO_ELEMENT
}

/// Arithmetic and hashing used by a session.
pub trait Suite: Clone + fmt::Debug + PartialEq + Eq + Hash {
    type Scalar: Clone + fmt::Debug + PartialEq + Eq + Hash;
    type Element: Clone + fmt::Debug + PartialEq + Eq + Hash;
    type Key: Clone + fmt::Debug + PartialEq + Eq + Hash;
    type Counter: Clone + fmt::Debug + PartialEq + Eq + Hash;
    type Password: Clone + fmt::Debug;

    fn group_label(&self) -> &str;
    /// Same suite over another group; `None` if the label is unknown.
    fn with_group(&self, label: &str) -> Option<Self>;
    fn password_element(&self, pw: &Self::Password, pid: Option<&str>) -> Self::Element;
    /// Fresh secret scalar in [2, q). `role` names it in symbolic mode.
    fn draw_scalar(&self, rng: &mut ChaCha8Rng, role: &str) -> Self::Scalar;
    fn add(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn neg(&self, a: &Self::Scalar) -> Self::Scalar;
    fn exp(&self, base: &Self::Element, e: &Self::Scalar) -> Self::Element;
    fn mul(&self, a: &Self::Element, b: &Self::Element) -> Self::Element;
    fn valid_scalar(&self, s: &Self::Scalar) -> bool;
    fn valid_element(&self, e: &Self::Element) -> bool;
    fn h(&self, k: &Self::Element) -> Self::Key;
    fn kcf(&self, ks: &Self::Key, ss: &Self::Scalar) -> Self::Key;
    fn pmk(&self, ks: &Self::Key, ss: &Self::Scalar) -> Self::Key;
    fn cn(
        &self,
        kc: &Self::Key,
        counter: &Self::Counter,
        first: (&Self::Scalar, &Self::Element),
        second: (&Self::Scalar, &Self::Element),
    ) -> Self::Key;
    fn counter(&self, n: u16, role: &str) -> Self::Counter;
    /// Short public tag identifying the pair of commits, order-independent.
    fn session_tag(&self, a: (&Self::Scalar, &Self::Element), b: (&Self::Scalar, &Self::Element)) -> String;
    /// Short digest of a key, safe to print.
    fn key_digest(&self, k: &Self::Key) -> String;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("no password for {own} -> {peer} with identifier {pid:?}")]
    MissingPassword { own: Mac, peer: Mac, pid: Option<String> },
    #[error("operation needs phase {expected}, session is {actual:?}")]
    WrongPhase { expected: &'static str, actual: Phase },
    #[error("shared secret is degenerate")]
    Degenerate,
    #[error("group `{0}` is unknown to the suite")]
    UnknownGroup(String),
}

/// Why a received commit or confirm was refused. Each carries the offending field.
#[derive(Debug, Error, Clone, PartialEq, Eq, Hash)]
pub enum Reject {
    #[error("scalar out of range: {0}")]
    BadScalar(String),
    #[error("element invalid: {0}")]
    BadElement(String),
    #[error("commit reflects our own {0}")]
    Reflected(&'static str),
    #[error("unknown password identifier `{0}`")]
    UnknownPasswordIdentifier(String),
    #[error("password identifiers differ: ours {own:?}, peer {peer:?}")]
    PidMismatch { own: Option<String>, peer: Option<String> },
    #[error("password identifier `{0}` not allowed on a mesh link")]
    PidForbidden(String),
    #[error("unsupported group `{0}`")]
    BadGroup(String),
    #[error("confirm does not verify")]
    BadAuth,
    #[error("shared secret is degenerate")]
    Degenerate,
}

impl Reject {
    pub fn code(&self) -> &'static str {
        match self {
            Reject::BadScalar(_) => "BadScalar",
            Reject::BadElement(_) => "BadElement",
            Reject::Reflected(_) => "Reflected",
            Reject::UnknownPasswordIdentifier(_) => "UnknownPasswordIdentifier",
            Reject::PidMismatch { .. } => "PidMismatch",
            Reject::PidForbidden(_) => "PidForbidden",
            Reject::BadGroup(_) => "BadGroup",
            Reject::BadAuth => "BadAuth",
            Reject::Degenerate => "Degenerate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Fresh,
    Committed,
    Confirmed,
    Accepted,
    Failed,
}

/// Passwords keyed by (own identity, peer identity, identifier).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PasswordStore<P> {
    entries: BTreeMap<(Mac, Mac, Option<String>), P>,
}

impl<P> Default for PasswordStore<P> {
    fn default() -> Self {
        PasswordStore { entries: BTreeMap::new() }
    }
}

impl<P: Clone> PasswordStore<P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, own: Mac, peer: Mac, pid: Option<&str>, pw: P) {
        self.entries.insert((own, peer, pid.map(str::to_string)), pw);
    }

    pub fn lookup(&self, own: Mac, peer: Mac, pid: Option<&str>) -> Result<&P, SessionError> {
        self.entries.get(&(own, peer, pid.map(str::to_string))).ok_or_else(|| SessionError::MissingPassword {
            own,
            peer,
            pid: pid.map(str::to_string),
        })
    }

    pub fn contains(&self, own: Mac, peer: Mac, pid: Option<&str>) -> bool {
        self.lookup(own, peer, pid).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(Mac, Mac, Option<String>), &P)> {
        self.entries.iter()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CommitPayload<S: Suite> {
    pub group: String,
    pub scalar: Option<S::Scalar>,
    pub element: Option<S::Element>,
    pub password_id: Option<String>,
    pub token: Option<Vec<u8>>,
    pub status: u16,
}

impl<S: Suite> CommitPayload<S> {
    /// A status-only frame such as a rejection or a token request.
    pub fn status_only(group: &str, status: u16, password_id: Option<String>, token: Option<Vec<u8>>) -> Self {
        CommitPayload { group: group.to_string(), scalar: None, element: None, password_id, token, status }
    }

    pub fn values(&self) -> Option<(&S::Scalar, &S::Element)> {
        Some((self.scalar.as_ref()?, self.element.as_ref()?))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConfirmPayload<S: Suite> {
    pub send_confirm: S::Counter,
    pub confirm: S::Key,
}

/// What the caller must do after a peer commit passed validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CommitVerdict {
    /// Stored; keys can be derived. `undefined_pid` marks the unspecified
    /// different-identifier case under literal rules.
    Accept { undefined_pid: bool },
    /// We must re-commit with these settings before the exchange can go on.
    Recommit { group: Option<String>, pid: Option<Option<String>> },
    /// The peer is expected to re-commit; ignore this one.
    Wait,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PidResolution {
    Continue,
    Adopt(String),
    Wait,
    Undefined,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupResolution {
    Continue,
    Recommit(String),
    Wait,
}

/// Inputs to commit processing that live outside the session.
pub struct CommitContext<'a, P> {
    pub mode: &'a ModeFlags,
    pub level: Level,
    pub supported: &'a [String],
    pub store: &'a PasswordStore<P>,
    pub mesh: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SessionState<S: Suite> {
    pub suite: S,
    pub own_id: Mac,
    pub peer_id: Mac,
    /// Party name used to label fresh values ("L", "R" or a device name).
    pub role: String,
    pub session_id: Option<String>,
    pub pwe: Option<S::Element>,
    pub own_pid: Option<String>,
    pub r: Option<S::Scalar>,
    pub m: Option<S::Scalar>,
    pub s_own: Option<S::Scalar>,
    pub e_own: Option<S::Element>,
    pub peer_commit: Option<CommitPayload<S>>,
    pub k: Option<S::Element>,
    pub ks: Option<S::Key>,
    pub kc: Option<S::Key>,
    pub pmk: Option<S::Key>,
    pub ss: Option<S::Scalar>,
    pub send_confirm: u16,
    pub phase: Phase,
    commits: u32,
}

impl<S: Suite> SessionState<S> {
    pub fn new(suite: S, own_id: Mac, peer_id: Mac, own_pid: Option<String>, role: &str) -> Self {
        SessionState {
            suite,
            own_id,
            peer_id,
            role: role.to_string(),
            session_id: None,
            pwe: None,
            own_pid,
            r: None,
            m: None,
            s_own: None,
            e_own: None,
            peer_commit: None,
            k: None,
            ks: None,
            kc: None,
            pmk: None,
            ss: None,
            send_confirm: 0,
            phase: Phase::Fresh,
            commits: 0,
        }
    }

    pub fn group_label(&self) -> &str {
        self.suite.group_label()
    }

    fn resolve_pwe(&mut self, store: &PasswordStore<S::Password>) -> Result<S::Element, SessionError> {
        let pw = store.lookup(self.own_id, self.peer_id, self.own_pid.as_deref())?;
        let pwe = self.suite.password_element(pw, self.own_pid.as_deref());
        self.pwe = Some(pwe.clone());
        Ok(pwe)
    }

    /// Draws r and m from `seed` (mixed with a per-session commit counter)
    /// and produces our commit.
    pub fn generate_commit(
        &mut self,
        store: &PasswordStore<S::Password>,
        seed: u64,
    ) -> Result<CommitPayload<S>, SessionError> {
        self.resolve_pwe(store)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (self.commits as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let (r, m) = loop {
            let r = self.suite.draw_scalar(&mut rng, &format!("r_{}", self.role));
            let m = self.suite.draw_scalar(&mut rng, &format!("m_{}", self.role));
            if self.suite.valid_scalar(&self.suite.add(&r, &m)) {
                break (r, m);
            }
        };
        Ok(self.commit_with(r, m))
    }

    /// Commit with caller-chosen secrets. The password element must already
    /// be resolved (see `generate_commit_with`).
    fn commit_with(&mut self, r: S::Scalar, m: S::Scalar) -> CommitPayload<S> {
        let pwe = self.pwe.clone().expect("password element resolved");
        let s = self.suite.add(&r, &m);
        let e = self.suite.exp(&pwe, &self.suite.neg(&m));
        self.r = Some(r);
        self.m = Some(m);
        self.s_own = Some(s.clone());
        self.e_own = Some(e.clone());
        self.peer_commit = None;
        self.k = None;
        self.ks = None;
        self.kc = None;
        self.pmk = None;
        self.ss = None;
        self.session_id = None;
        self.phase = Phase::Committed;
        self.commits += 1;
        self.own_commit()
    }

    pub fn generate_commit_with(
        &mut self,
        store: &PasswordStore<S::Password>,
        r: S::Scalar,
        m: S::Scalar,
    ) -> Result<CommitPayload<S>, SessionError> {
        self.resolve_pwe(store)?;
        Ok(self.commit_with(r, m))
    }

    /// Our current commit as it goes on the wire.
    pub fn own_commit(&self) -> CommitPayload<S> {
        CommitPayload {
            group: self.group_label().to_string(),
            scalar: self.s_own.clone(),
            element: self.e_own.clone(),
            password_id: self.own_pid.clone(),
            token: None,
            status: STATUS_SUCCESS,
        }
    }

    /// Switches group and/or identifier and commits afresh.
    pub fn recommit(
        &mut self,
        group: Option<&str>,
        pid: Option<Option<String>>,
        store: &PasswordStore<S::Password>,
        seed: u64,
    ) -> Result<CommitPayload<S>, SessionError> {
        if let Some(g) = group {
            self.suite = self.suite.with_group(g).ok_or_else(|| SessionError::UnknownGroup(g.to_string()))?;
        }
        if let Some(p) = pid {
            self.own_pid = p;
        }
        self.send_confirm = 0;
        self.generate_commit(store, seed)
    }

    /// Validates a peer commit and decides how to proceed.
    pub fn process_peer_commit(
        &mut self,
        c: &CommitPayload<S>,
        ctx: &CommitContext<'_, S::Password>,
    ) -> Result<CommitVerdict, Reject> {
        if !ctx.supported.iter().any(|g| *g == c.group) {
            return Err(Reject::BadGroup(c.group.clone()));
        }
        let peer_suite = self.suite.with_group(&c.group).ok_or_else(|| Reject::BadGroup(c.group.clone()))?;
        let scalar = c.scalar.as_ref().ok_or_else(|| Reject::BadScalar("missing".into()))?;
        if !peer_suite.valid_scalar(scalar) {
            return Err(Reject::BadScalar(format!("{scalar:?}")));
        }
        let element = c.element.as_ref().ok_or_else(|| Reject::BadElement("missing".into()))?;
        if !peer_suite.valid_element(element) {
            return Err(Reject::BadElement(format!("{element:?}")));
        }
        if ctx.mode.reflection_guard && self.phase == Phase::Committed && c.group == self.group_label() {
            if self.s_own.as_ref() == Some(scalar) {
                return Err(Reject::Reflected("scalar"));
            }
            if self.e_own.as_ref() == Some(element) {
                return Err(Reject::Reflected("element"));
            }
        }
        if ctx.mesh && ctx.mode.mesh_no_pid {
            if let Some(p) = &c.password_id {
                return Err(Reject::PidForbidden(p.clone()));
            }
        }
        let pid = self.resolve_pid(c.password_id.as_deref(), ctx)?;
        let group = self.resolve_group(&c.group, ctx)?;

        let new_group = match &group {
            GroupResolution::Recommit(g) => Some(g.clone()),
            _ => None,
        };
        let new_pid = match &pid {
            PidResolution::Adopt(p) => Some(Some(p.clone())),
            _ => None,
        };
        if new_group.is_some() || new_pid.is_some() {
            return Ok(CommitVerdict::Recommit { group: new_group, pid: new_pid });
        }
        if group == GroupResolution::Wait || pid == PidResolution::Wait {
            return Ok(CommitVerdict::Wait);
        }
        self.peer_commit = Some(c.clone());
        Ok(CommitVerdict::Accept { undefined_pid: pid == PidResolution::Undefined })
    }

    /// Identifier agreement between our setting and the peer's.
    pub fn resolve_pid(
        &self,
        peer_pid: Option<&str>,
        ctx: &CommitContext<'_, S::Password>,
    ) -> Result<PidResolution, Reject> {
        let renegotiate = ctx.level == Level::Communication || ctx.mode.pid_patch;
        match (self.own_pid.as_deref(), peer_pid) {
            (None, None) => Ok(PidResolution::Continue),
            (Some(a), Some(b)) if a == b => Ok(PidResolution::Continue),
            (Some(a), Some(b)) => {
                if ctx.mode.pid_patch {
                    Err(Reject::PidMismatch { own: Some(a.to_string()), peer: Some(b.to_string()) })
                } else {
                    Ok(PidResolution::Undefined)
                }
            }
            (None, Some(p)) if renegotiate => {
                if ctx.store.contains(self.own_id, self.peer_id, Some(p)) {
                    Ok(PidResolution::Adopt(p.to_string()))
                } else {
                    Err(Reject::UnknownPasswordIdentifier(p.to_string()))
                }
            }
            (Some(_), None) if renegotiate => Ok(PidResolution::Wait),
            _ => Ok(PidResolution::Continue),
        }
    }

    /// Group agreement: the lesser identity adopts the offered group.
    pub fn resolve_group(
        &self,
        offered: &str,
        ctx: &CommitContext<'_, S::Password>,
    ) -> Result<GroupResolution, Reject> {
        if offered == self.group_label() {
            return Ok(GroupResolution::Continue);
        }
        if !ctx.supported.iter().any(|g| g == offered) || self.suite.with_group(offered).is_none() {
            return Err(Reject::BadGroup(offered.to_string()));
        }
        if self.own_id < self.peer_id {
            Ok(GroupResolution::Recommit(offered.to_string()))
        } else {
            Ok(GroupResolution::Wait)
        }
    }

    pub fn derive_keys(&mut self) -> Result<(), SessionError> {
        let wrong = |p| SessionError::WrongPhase { expected: "committed with peer commit", actual: p };
        let peer = self.peer_commit.as_ref().ok_or(wrong(self.phase))?;
        let (ps, pe) = peer.values().ok_or(wrong(self.phase))?;
        let (pwe, r) = (self.pwe.as_ref().ok_or(wrong(self.phase))?, self.r.as_ref().ok_or(wrong(self.phase))?);
        let k = shared_secret(&self.suite, pwe, r, ps, pe);
        if !self.suite.valid_element(&k) {
            return Err(SessionError::Degenerate);
        }
        let ks = self.suite.h(&k);
        let s_own = self.s_own.as_ref().ok_or(wrong(self.phase))?;
        let e_own = self.e_own.as_ref().ok_or(wrong(self.phase))?;
        let ss = self.suite.add(s_own, ps);
        self.kc = Some(self.suite.kcf(&ks, &ss));
        self.pmk = Some(self.suite.pmk(&ks, &ss));
        self.session_id = Some(self.suite.session_tag((s_own, e_own), (ps, pe)));
        self.k = Some(k);
        self.ks = Some(ks);
        self.ss = Some(ss);
        Ok(())
    }

    /// Next confirm; increments the send-confirm counter.
    pub fn generate_confirm(&mut self) -> Result<ConfirmPayload<S>, SessionError> {
        let wrong = SessionError::WrongPhase { expected: "keys derived", actual: self.phase };
        let kc = self.kc.as_ref().ok_or(wrong.clone())?;
        let peer = self.peer_commit.as_ref().and_then(|c| c.values()).ok_or(wrong.clone())?;
        let own = (self.s_own.as_ref().ok_or(wrong.clone())?, self.e_own.as_ref().ok_or(wrong)?);
        self.send_confirm = self.send_confirm.saturating_add(1);
        let counter = self.suite.counter(self.send_confirm, &self.role);
        let confirm = self.suite.cn(kc, &counter, own, peer);
        if self.phase != Phase::Accepted {
            self.phase = Phase::Confirmed;
        }
        Ok(ConfirmPayload { send_confirm: counter, confirm })
    }

    pub fn verify_confirm(&mut self, c: &ConfirmPayload<S>) -> Result<(), Reject> {
        let kc = self.kc.as_ref().ok_or(Reject::BadAuth)?;
        let peer = self.peer_commit.as_ref().and_then(|c| c.values()).ok_or(Reject::BadAuth)?;
        let own = (self.s_own.as_ref().ok_or(Reject::BadAuth)?, self.e_own.as_ref().ok_or(Reject::BadAuth)?);
        let expected = self.suite.cn(kc, &c.send_confirm, peer, own);
        if expected == c.confirm {
            self.phase = Phase::Accepted;
            Ok(())
        } else {
            Err(Reject::BadAuth)
        }
    }

    pub fn pmk_digest(&self) -> Option<String> {
        self.pmk.as_ref().map(|k| self.suite.key_digest(k))
    }
}

/// K = (PWE^{s_peer} * E_peer)^{r}.
pub fn shared_secret<S: Suite>(
    suite: &S,
    pwe: &S::Element,
    r: &S::Scalar,
    peer_scalar: &S::Scalar,
    peer_element: &S::Element,
) -> S::Element {
    suite.exp(&suite.mul(&suite.exp(pwe, peer_scalar), peer_element), r)
}
