//! Scenario data and its TOML form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::device::{DeviceConfig, SmeCommand};
use crate::group::{Element, GroupParams, Scalar};
use crate::mode::{Level, ModeFlags, FLAG_NAMES};
use crate::session::{Body, CommitPayload, ConfirmPayload, Frame, FrameKind, Mac};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("unknown mode preset `{0}`")]
    UnknownMode(String),
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read scenario: {0}")]
    Parse(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PasswordSpec {
    pub peer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pid: Option<String>,
    pub password: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub name: String,
    pub mac: Mac,
    /// Preferred first.
    #[serde(default = "default_groups")]
    pub groups: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pid: Option<String>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub mesh: bool,
    /// Shorthand: this password, no identifier, toward every other device.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub password: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub passwords: Vec<PasswordSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue_capacity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sync_limit: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0_ticks: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry_limit: Option<u32>,
}

impl DeviceSpec {
    pub fn new(name: &str, n: u8) -> Self {
        DeviceSpec {
            name: name.to_string(),
            mac: Mac::local(n),
            groups: default_groups(),
            pid: None,
            mesh: false,
            password: Some("correct horse".into()),
            passwords: Vec::new(),
            threshold: None,
            queue_capacity: None,
            sync_limit: None,
            t0_ticks: None,
            retry_limit: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmeKind {
    Initiate,
    Kill,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmeStep {
    pub round: u64,
    pub device: String,
    pub cmd: SmeKind,
    pub peer: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    #[default]
    Deliver,
    Drop,
    Reflect,
    Replay,
    Inject,
    Noop,
}

/// One scripted adversary step.
///
/// `from`/`to`/`kind`/`nth` select a frame: in flight for deliver and drop,
/// from the history for the rest (default: the latest match). An inject
/// copies the selected frame, if any, then applies the field overrides.
/// Numeric overrides accept decimals or `q`, `q-1`, `p-1`, `gen`.
/// A `tag` names one frame by its history index and overrides the selectors.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptStep {
    pub round: u64,
    pub action: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<FrameKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nth: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub send_from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub send_to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<String>,
    /// `""` clears the identifier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sc: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confirm: Option<String>,
}

impl ScriptStep {
    pub fn new(round: u64, action: ActionKind) -> Self {
        ScriptStep { round, action, ..Default::default() }
    }

    pub fn select(mut self, from: &str, to: &str, kind: FrameKind) -> Self {
        self.from = Some(from.into());
        self.to = Some(to.into());
        self.kind = Some(kind);
        self
    }
}

/// An expected check outcome as written in the file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expected {
    Bool(bool),
    Int(i64),
    Text(String),
}

impl Expected {
    pub fn render(&self) -> String {
        match self {
            Expected::Bool(b) => b.to_string(),
            Expected::Int(i) => i.to_string(),
            Expected::Text(s) => s.clone(),
        }
    }
}

impl From<bool> for Expected {
    fn from(b: bool) -> Self {
        Expected::Bool(b)
    }
}

impl From<i64> for Expected {
    fn from(i: i64) -> Self {
        Expected::Int(i)
    }
}

impl From<&str> for Expected {
    fn from(s: &str) -> Self {
        Expected::Text(s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Preset the flags start from.
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub flags: BTreeMap<String, bool>,
    #[serde(default)]
    pub level: Level,
    /// Replaces every device's group list when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_rounds")]
    pub rounds: u64,
    /// Deliver everything still in flight after the scripted steps of a round.
    #[serde(default = "yes")]
    pub passive_between: bool,
    pub devices: Vec<DeviceSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sme: Vec<SmeStep>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub adversary: Vec<ScriptStep>,
    /// Mode label to check name to expected outcome.
    #[serde(default)]
    pub expectations: BTreeMap<String, BTreeMap<String, Expected>>,
    /// Checks a preset comparison reports. Empty: every check both presets expect.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub findings: Vec<String>,
}

pub const DEFAULT_SEED: u64 = 0x5AE0_2020;
pub const DEFAULT_ROUNDS: u64 = 40;

fn default_groups() -> Vec<String> {
    vec![crate::group::FF64.to_string()]
}
fn default_mode() -> String {
    "spec2020".into()
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_rounds() -> u64 {
    DEFAULT_ROUNDS
}
fn yes() -> bool {
    true
}
fn is_false(b: &bool) -> bool {
    !*b
}

/// `spec2020`, `patched`, or the nearer preset with its differing flags:
/// `spec2020+receiver_rule`, `patched-auth_event`.
pub fn mode_label(m: &ModeFlags) -> String {
    if let Some(p) = m.preset_name() {
        return p.to_string();
    }
    let on: Vec<&str> = FLAG_NAMES.iter().copied().filter(|f| m.get(f) == Some(true)).collect();
    let off: Vec<&str> = FLAG_NAMES.iter().copied().filter(|f| m.get(f) == Some(false)).collect();
    if on.len() <= off.len() {
        format!("spec2020+{}", on.join("+"))
    } else {
        format!("patched-{}", off.join("-"))
    }
}

impl Scenario {
    pub fn new(name: &str, description: &str, devices: Vec<DeviceSpec>) -> Self {
        Scenario {
            name: name.to_string(),
            description: description.to_string(),
            mode: default_mode(),
            flags: BTreeMap::new(),
            level: Level::Device,
            group: None,
            seed: DEFAULT_SEED,
            rounds: DEFAULT_ROUNDS,
            passive_between: true,
            devices,
            sme: Vec::new(),
            adversary: Vec::new(),
            expectations: BTreeMap::new(),
            findings: Vec::new(),
        }
    }

    pub fn from_toml(s: &str) -> Result<Self, ScenarioError> {
        let scn: Scenario = toml::from_str(s).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn mode_flags(&self) -> Result<ModeFlags, ScenarioError> {
        let mut m = ModeFlags::preset(&self.mode).ok_or_else(|| ScenarioError::UnknownMode(self.mode.clone()))?;
        for (k, v) in &self.flags {
            m.set(k, *v).map_err(ScenarioError::Invalid)?;
        }
        Ok(m)
    }

    pub fn set_mode(&mut self, m: ModeFlags) {
        self.flags.clear();
        if let Some(p) = m.preset_name() {
            self.mode = p.to_string();
        } else {
            self.mode = "spec2020".into();
            for f in FLAG_NAMES {
                if m.get(f) == Some(true) {
                    self.flags.insert(f.to_string(), true);
                }
            }
        }
    }

    pub fn with_mode(&self, m: ModeFlags) -> Self {
        let mut s = self.clone();
        s.set_mode(m);
        s
    }

    pub fn mode_label(&self) -> Result<String, ScenarioError> {
        Ok(mode_label(&self.mode_flags()?))
    }

    pub fn expect(&mut self, mode: &str, check: &str, value: impl Into<Expected>) -> &mut Self {
        self.expectations.entry(mode.to_string()).or_default().insert(check.to_string(), value.into());
        self
    }

    pub fn initiate(&mut self, round: u64, dev: &str, peer: &str) -> &mut Self {
        self.sme.push(SmeStep { round, device: dev.into(), cmd: SmeKind::Initiate, peer: peer.into() });
        self
    }

    pub fn mac_of(&self, name: &str) -> Result<Mac, ScenarioError> {
        self.devices
            .iter()
            .find(|d| d.name == name)
            .map(|d| d.mac)
            .ok_or_else(|| ScenarioError::UnknownDevice(name.to_string()))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.mode_flags()?;
        if self.devices.is_empty() {
            return Err(ScenarioError::Invalid("no devices".into()));
        }
        for (i, d) in self.devices.iter().enumerate() {
            if self.devices[..i].iter().any(|o| o.name == d.name || o.mac == d.mac) {
                return Err(ScenarioError::Invalid(format!("duplicate device `{}`", d.name)));
            }
            for g in self.group.iter().chain(&d.groups) {
                GroupParams::by_label(g).map_err(|_| ScenarioError::UnknownGroup(g.clone()))?;
            }
            for p in &d.passwords {
                self.mac_of(&p.peer)?;
            }
        }
        for s in &self.sme {
            self.mac_of(&s.device)?;
            self.mac_of(&s.peer)?;
        }
        for a in &self.adversary {
            for n in [&a.from, &a.to, &a.send_from, &a.send_to].into_iter().flatten() {
                self.mac_of(n)?;
            }
            if a.group.is_some() && a.action != ActionKind::Inject {
                return Err(ScenarioError::Invalid("group override outside inject".into()));
            }
        }
        Ok(())
    }

    pub fn device_configs(&self) -> Result<Vec<DeviceConfig>, ScenarioError> {
        self.validate()?;
        let mode = self.mode_flags()?;
        let mut out = Vec::new();
        for (i, d) in self.devices.iter().enumerate() {
            let groups = match &self.group {
                Some(g) => vec![g.clone()],
                None => d.groups.clone(),
            };
            let seed = self.seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let mut c = DeviceConfig::new(&d.name, d.mac, groups, mode, seed);
            c.level = self.level;
            c.pid = d.pid.clone();
            c.mesh = d.mesh;
            if let Some(pw) = &d.password {
                for o in self.devices.iter().filter(|o| o.name != d.name) {
                    c.store.insert(d.mac, o.mac, None, pw.clone());
                }
            }
            for p in &d.passwords {
                c.store.insert(d.mac, self.mac_of(&p.peer)?, p.pid.as_deref(), p.password.clone());
            }
            c.threshold = d.threshold.unwrap_or(c.threshold);
            c.queue_capacity = d.queue_capacity.unwrap_or(c.queue_capacity);
            c.sync_limit = d.sync_limit.unwrap_or(c.sync_limit);
            c.t0_ticks = d.t0_ticks.unwrap_or(c.t0_ticks);
            c.retry_limit = d.retry_limit.unwrap_or(c.retry_limit);
            out.push(c);
        }
        Ok(out)
    }

    pub fn sme_command(&self, s: &SmeStep) -> Result<(Mac, SmeCommand), ScenarioError> {
        let peer = self.mac_of(&s.peer)?;
        let cmd = match s.cmd {
            SmeKind::Initiate => SmeCommand::Initiate(peer),
            SmeKind::Kill => SmeCommand::Kill(peer),
        };
        Ok((self.mac_of(&s.device)?, cmd))
    }

    /// Round after which nothing scripted remains.
    pub fn last_scripted_round(&self) -> u64 {
        self.sme.iter().map(|s| s.round).chain(self.adversary.iter().map(|a| a.round)).max().unwrap_or(0)
    }

    /// Builds an injected frame from an optional base and the step's overrides.
    pub fn build_inject(&self, step: &ScriptStep, base: Option<Frame>) -> Result<Frame, ScenarioError> {
        let mac = |n: &Option<String>| n.as_deref().map(|n| self.mac_of(n)).transpose();
        let src = mac(&step.send_from)?.or(base.as_ref().map(|b| b.src));
        let dst = mac(&step.send_to)?.or(base.as_ref().map(|b| b.dst));
        let (Some(src), Some(dst)) = (src, dst) else {
            return Err(ScenarioError::Invalid("inject needs a base frame or send_from/send_to".into()));
        };
        let confirm_fields = step.sc.is_some() || step.confirm.is_some();
        let body = match base.map(|b| b.body) {
            Some(Body::Confirm(mut c)) => {
                self.override_confirm(step, &mut c)?;
                Body::Confirm(c)
            }
            None if confirm_fields => {
                let mut c = ConfirmPayload { send_confirm: 1, confirm: [0; 32] };
                self.override_confirm(step, &mut c)?;
                Body::Confirm(c)
            }
            base => {
                let mut c = match base {
                    Some(Body::Commit(c)) => c,
                    _ => CommitPayload::status_only(crate::group::FF64, 0, None, None),
                };
                if let Some(g) = &step.group {
                    c.group = g.clone();
                }
                let gp = GroupParams::by_label(&c.group).ok();
                if let Some(v) = &step.scalar {
                    c.scalar = Some(Scalar::from_raw(number(v, gp.as_ref())?));
                }
                if let Some(v) = &step.element {
                    c.element = Some(Element::from_raw(number(v, gp.as_ref())?));
                }
                if let Some(p) = &step.pid {
                    c.password_id = if p.is_empty() { None } else { Some(p.clone()) };
                }
                if let Some(s) = step.status {
                    c.status = s;
                }
                if let Some(t) = &step.token {
                    c.token = Some(hex::decode(t).map_err(|_| ScenarioError::Invalid(format!("bad token `{t}`")))?);
                }
                Body::Commit(c)
            }
        };
        Ok(Frame { src, dst, body })
    }

    fn override_confirm(
        &self,
        step: &ScriptStep,
        c: &mut ConfirmPayload<crate::session::ConcreteSuite>,
    ) -> Result<(), ScenarioError> {
        if let Some(sc) = step.sc {
            c.send_confirm = sc;
        }
        if let Some(h) = &step.confirm {
            c.confirm = hex::decode(h)
                .ok()
                .and_then(|b| <[u8; 32]>::try_from(b).ok())
                .ok_or_else(|| ScenarioError::Invalid(format!("bad confirm `{h}`")))?;
        }
        Ok(())
    }
}

fn number(v: &str, g: Option<&GroupParams>) -> Result<u64, ScenarioError> {
    let named = g.and_then(|g| match v {
        "q" => Some(g.q()),
        "q-1" => Some(g.q() - 1),
        "p-1" => Some(g.p() - 1),
        "gen" => Some(g.generator().value()),
        _ => None,
    });
    named.or_else(|| v.parse().ok()).ok_or_else(|| ScenarioError::Invalid(format!("bad number `{v}`")))
}
