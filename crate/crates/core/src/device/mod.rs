//! Device level: protocol instances (PI), the parent process (PP) that owns
//! them, and the SME that drives both.
//!
//! A [`Device`] is the whole complex for one station. It only advances
//! through [`Device::dispatch`], which drains the inbox and fires due timers.

mod pi;
mod pp;
mod pwe;

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::Serialize;

pub use pi::{Event, Pi, PiCtx, PiState, Step};
pub use pwe::{derive_pwe, derive_pwe_with};

use crate::group::{Element, GroupParams, Scalar};
use crate::mode::{Level, ModeFlags};
use crate::session::{Frame, Mac, PasswordStore};

pub const DEFAULT_SYNC_LIMIT: u32 = 3;
pub const DEFAULT_T0_TICKS: u64 = 2;
pub const DEFAULT_THRESHOLD: usize = 5;
pub const DEFAULT_QUEUE_CAPACITY: usize = 8;
pub const DEFAULT_RETRY_LIMIT: u32 = 4;

/// Static configuration of one station.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeviceConfig {
    pub name: String,
    pub mac: Mac,
    /// Supported groups, preferred first.
    pub groups: Vec<String>,
    pub store: PasswordStore<String>,
    /// Identifier this station asks for.
    pub pid: Option<String>,
    pub mesh: bool,
    pub mode: ModeFlags,
    pub level: Level,
    pub sync_limit: u32,
    pub t0_ticks: u64,
    pub threshold: usize,
    pub queue_capacity: usize,
    pub retry_limit: u32,
    pub token_key: [u8; 32],
    pub seed: u64,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("device `{0}` supports no group")]
    NoGroups(String),
    #[error("device `{dev}`: unknown group `{group}`")]
    UnknownGroup { dev: String, group: String },
}

impl DeviceConfig {
    pub fn new(name: &str, mac: Mac, groups: Vec<String>, mode: ModeFlags, seed: u64) -> Self {
        let token_key = pp::token_key(mac, seed);
        DeviceConfig {
            name: name.to_string(),
            mac,
            groups,
            store: PasswordStore::new(),
            pid: None,
            mesh: false,
            mode,
            level: Level::Device,
            sync_limit: DEFAULT_SYNC_LIMIT,
            t0_ticks: DEFAULT_T0_TICKS,
            threshold: DEFAULT_THRESHOLD,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            retry_limit: DEFAULT_RETRY_LIMIT,
            token_key,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.groups.is_empty() {
            return Err(ConfigError::NoGroups(self.name.clone()));
        }
        for g in &self.groups {
            if GroupParams::by_label(g).is_err() {
                return Err(ConfigError::UnknownGroup { dev: self.name.clone(), group: g.clone() });
            }
        }
        Ok(())
    }

    pub fn preferred_group(&self) -> &str {
        &self.groups[0]
    }

    pub fn supports(&self, group: &str) -> bool {
        self.groups.iter().any(|g| g == group)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "cmd", content = "peer")]
pub enum SmeCommand {
    Initiate(Mac),
    Kill(Mac),
}

impl SmeCommand {
    pub fn peer(self) -> Mac {
        match self {
            SmeCommand::Initiate(m) | SmeCommand::Kill(m) => m,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Input {
    Sme(SmeCommand),
    Frame(Frame),
}

/// Assertable trace markers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "marker")]
pub enum Marker {
    BeginAuth { actor: Mac, peer: Mac, sid: String, pmk: String },
    Accepted { actor: Mac, peer: Mac, sid: String, pmk: String },
    Rejected { actor: Mac, peer: Mac, reason: String },
    Unhandled { actor: Mac, peer: Mac, state: PiState, event: String },
    Initiated { actor: Mac, peer: Mac },
    InitiateRefused { actor: Mac, peer: Mac },
    TokenDemanded { actor: Mac, peer: Mac },
    TokenlessAdmit { actor: Mac, peer: Mac, open: usize, threshold: usize },
    Overflow { actor: Mac, input: String },
    Retry { actor: Mac, peer: Mac, attempt: u32 },
    RetryExhausted { actor: Mac, peer: Mac, attempts: u32 },
    UndefinedBehaviour { actor: Mac, peer: Mac, what: String },
    ConToNothing { actor: Mac, peer: Mac },
    Deleted { actor: Mac, peer: Mac, cause: String },
    GroupOffer { actor: Mac, peer: Mac, offered: String, received: String },
    Stuck { actor: Mac, peer: Mac, state: PiState },
}

impl Marker {
    pub fn name(&self) -> &'static str {
        match self {
            Marker::BeginAuth { .. } => "BeginAuth",
            Marker::Accepted { .. } => "Accepted",
            Marker::Rejected { .. } => "Rejected",
            Marker::Unhandled { .. } => "Unhandled",
            Marker::Initiated { .. } => "Initiated",
            Marker::InitiateRefused { .. } => "InitiateRefused",
            Marker::TokenDemanded { .. } => "TokenDemanded",
            Marker::TokenlessAdmit { .. } => "TokenlessAdmit",
            Marker::Overflow { .. } => "Overflow",
            Marker::Retry { .. } => "Retry",
            Marker::RetryExhausted { .. } => "RetryExhausted",
            Marker::UndefinedBehaviour { .. } => "UndefinedBehaviour",
            Marker::ConToNothing { .. } => "ConToNothing",
            Marker::Deleted { .. } => "Deleted",
            Marker::GroupOffer { .. } => "GroupOffer",
            Marker::Stuck { .. } => "Stuck",
        }
    }

    pub fn actor(&self) -> Mac {
        match self {
            Marker::BeginAuth { actor, .. }
            | Marker::Accepted { actor, .. }
            | Marker::Rejected { actor, .. }
            | Marker::Unhandled { actor, .. }
            | Marker::Initiated { actor, .. }
            | Marker::InitiateRefused { actor, .. }
            | Marker::TokenDemanded { actor, .. }
            | Marker::TokenlessAdmit { actor, .. }
            | Marker::Overflow { actor, .. }
            | Marker::Retry { actor, .. }
            | Marker::RetryExhausted { actor, .. }
            | Marker::UndefinedBehaviour { actor, .. }
            | Marker::ConToNothing { actor, .. }
            | Marker::Deleted { actor, .. }
            | Marker::GroupOffer { actor, .. }
            | Marker::Stuck { actor, .. } => *actor,
        }
    }
}

/// `{"mac":..,"state":..,"sync":n,"sc":n}` for one PI.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PiSnapshot {
    pub mac: Mac,
    pub state: PiState,
    pub sync: u32,
    pub sc: u16,
}

impl From<&Pi> for PiSnapshot {
    fn from(p: &Pi) -> Self {
        PiSnapshot { mac: p.peer, state: p.state, sync: p.sync, sc: p.sc() }
    }
}

/// What a dispatch produced, in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Output {
    Send(Frame),
    /// An event crossing the PP/PI boundary (`to_pi` tells the direction).
    Event { peer: Mac, event: &'static str, to_pi: bool },
    State { pi: PiSnapshot, open: usize },
    Marker(Marker),
    /// Which values a confirm just sent binds; follows its `Send`.
    Origin(ConfirmOrigin),
}

/// The sender's side of a confirm: whose commits it covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ConfirmOrigin {
    pub confirm: [u8; 32],
    pub pwe: Element,
    pub own: (Scalar, Element),
    pub peer: (Scalar, Element),
}

/// Sticky flags for the explorer's safety checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Audit {
    pub tokenless_admit: bool,
    pub overflow: bool,
    pub con_to_nothing: bool,
    pub unhandled: bool,
}

/// One station: PP database plus SME bookkeeping.
#[derive(Clone, Debug)]
pub struct Device {
    pub cfg: Arc<DeviceConfig>,
    pub pis: Vec<Pi>,
    pub open: usize,
    pub inbox: VecDeque<Input>,
    /// Failed attempts per peer, for SME retries.
    pub attempts: BTreeMap<Mac, u32>,
    pub audit: Audit,
    next_handle: u32,
}

impl Device {
    pub fn new(cfg: DeviceConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(Device {
            cfg: Arc::new(cfg),
            pis: Vec::new(),
            open: 0,
            inbox: VecDeque::new(),
            attempts: BTreeMap::new(),
            audit: Audit::default(),
            next_handle: 0,
        })
    }

    pub fn mac(&self) -> Mac {
        self.cfg.mac
    }

    /// Handle the next allocated PI gets; it also seeds that PI.
    pub fn next_handle(&self) -> u32 {
        self.next_handle
    }

    pub fn name(&self) -> &str {
        &self.cfg.name
    }

    /// Queues an input; a full queue drops it and reports an overflow.
    pub fn enqueue(&mut self, input: Input) -> Option<Marker> {
        if self.inbox.len() >= self.cfg.queue_capacity {
            self.audit.overflow = true;
            let what = match &input {
                Input::Sme(c) => format!("{c:?}"),
                Input::Frame(f) => format!("{:?} from {}", f.kind(), f.src),
            };
            return Some(Marker::Overflow { actor: self.mac(), input: what });
        }
        self.inbox.push_back(input);
        None
    }

    /// Handles everything currently queued, then fires due timers.
    pub fn dispatch(&mut self, now: u64) -> Vec<Output> {
        let mut out = self.dispatch_inbox(now);
        out.extend(self.fire_due(now));
        out
    }

    /// Handles the inputs queued at call time. Inputs queued meanwhile
    /// (SME retries) wait for the next dispatch.
    pub fn dispatch_inbox(&mut self, now: u64) -> Vec<Output> {
        let mut out = Vec::new();
        let batch: Vec<Input> = self.inbox.drain(..).collect();
        for input in batch {
            match input {
                Input::Sme(cmd) => self.handle_sme(cmd, now, &mut out),
                Input::Frame(f) => self.route_frame(f, now, &mut out),
            }
        }
        out
    }

    pub fn fire_due(&mut self, now: u64) -> Vec<Output> {
        let mut out = Vec::new();
        let due: Vec<u32> =
            self.pis.iter().filter(|p| p.t0.is_some_and(|d| d <= now)).map(|p| p.handle).collect();
        for h in due {
            self.fire_timer(h, now, &mut out);
        }
        out
    }

    /// Fires T0 of one PI regardless of its deadline.
    pub fn fire_timer(&mut self, handle: u32, now: u64, out: &mut Vec<Output>) {
        if let Some(i) = self.pis.iter().position(|p| p.handle == handle && p.t0.is_some()) {
            self.pis[i].t0 = None;
            self.deliver(i, Event::Retransmit, now, out);
        }
    }

    /// PIs whose state is not Nothing, counted afresh.
    pub fn open_recount(&self) -> usize {
        self.pis.iter().filter(|p| p.state != PiState::Nothing).count()
    }

    /// `{"pis":[..],"open":n}`
    pub fn snapshot(&self) -> serde_json::Value {
        let pis: Vec<PiSnapshot> = self.pis.iter().map(PiSnapshot::from).collect();
        serde_json::json!({ "pis": pis, "open": self.open })
    }

    pub fn pis_for(&self, peer: Mac) -> impl Iterator<Item = &Pi> {
        self.pis.iter().filter(move |p| p.peer == peer)
    }
}

#[cfg(test)]
mod tests;
