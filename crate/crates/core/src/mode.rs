//! Per-erratum behaviour switches.

use serde::{Deserialize, Serialize};

/// One boolean per patch. `spec2020()` turns everything off, `patched()` on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeFlags {
    /// Reject a peer commit whose scalar or element equals our own.
    pub reflection_guard: bool,
    /// Committed + invalid commit deletes the instance instead of hanging.
    pub deadlock_patch: bool,
    /// Unknown password identifier in Nothing emits Del; confirms are never
    /// routed to an instance in Nothing.
    pub pid_del_patch: bool,
    /// Invalid commit in Nothing is discarded and the instance deleted.
    pub silent_discard_patch: bool,
    /// Failed confirm below the sync limit emits Fail.
    pub fail_event_patch: bool,
    /// Accepted instances report Auth to the parent process.
    pub auth_event: bool,
    /// Anti-clogging kicks in at open >= threshold rather than open > threshold.
    pub geq_threshold: bool,
    /// An instance that received before sending accepts any supported group.
    pub receiver_rule: bool,
    /// Different identifiers on both sides are a hard failure, and a set
    /// identifier is adopted by the omitting side.
    pub pid_patch: bool,
    /// Mesh stations refuse password identifiers.
    pub mesh_no_pid: bool,
    /// A commit admitted through the token path is delivered as a Com event.
    pub com_event_explicit: bool,
}

pub const FLAG_NAMES: [&str; 11] = [
    "reflection_guard",
    "deadlock_patch",
    "pid_del_patch",
    "silent_discard_patch",
    "fail_event_patch",
    "auth_event",
    "geq_threshold",
    "receiver_rule",
    "pid_patch",
    "mesh_no_pid",
    "com_event_explicit",
];

impl ModeFlags {
    pub fn spec2020() -> Self {
        ModeFlags::default()
    }

    pub fn patched() -> Self {
        let mut m = ModeFlags::default();
        for n in FLAG_NAMES {
            m.set(n, true).expect("known flag");
        }
        m
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "spec2020" => Some(Self::spec2020()),
            "patched" => Some(Self::patched()),
            _ => None,
        }
    }

    fn slot(&mut self, name: &str) -> Option<&mut bool> {
        Some(match name {
            "reflection_guard" => &mut self.reflection_guard,
            "deadlock_patch" => &mut self.deadlock_patch,
            "pid_del_patch" => &mut self.pid_del_patch,
            "silent_discard_patch" => &mut self.silent_discard_patch,
            "fail_event_patch" => &mut self.fail_event_patch,
            "auth_event" => &mut self.auth_event,
            "geq_threshold" => &mut self.geq_threshold,
            "receiver_rule" => &mut self.receiver_rule,
            "pid_patch" => &mut self.pid_patch,
            "mesh_no_pid" => &mut self.mesh_no_pid,
            "com_event_explicit" => &mut self.com_event_explicit,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: bool) -> Result<(), String> {
        *self.slot(name).ok_or_else(|| format!("unknown mode flag `{name}`"))? = value;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<bool> {
        self.clone().slot(name).map(|b| *b)
    }

    /// Name of the preset this equals, if any.
    pub fn preset_name(&self) -> Option<&'static str> {
        if *self == Self::spec2020() {
            Some("spec2020")
        } else if *self == Self::patched() {
            Some("patched")
        } else {
            None
        }
    }
}

/// Which layer's rules govern password-identifier handling.
///
/// `Communication` follows the message-level description, where a set
/// identifier is adopted by the peer that omitted one. `Device` follows the
/// literal state machine, which never renegotiates unless `pid_patch` is on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Communication,
    #[default]
    Device,
}
