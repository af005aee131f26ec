//! Property verdicts shared by the simulator checks, the closure engine and the explorer.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    BoundReached,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::BoundReached => "BOUND_REACHED",
        })
    }
}

impl std::str::FromStr for Verdict {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PASS" | "pass" => Ok(Verdict::Pass),
            "FAIL" | "fail" => Ok(Verdict::Fail),
            "BOUND_REACHED" | "bound_reached" => Ok(Verdict::BoundReached),
            other => Err(format!("unknown verdict `{other}`")),
        }
    }
}

/// Outcome of one property check.
///
/// `notes` carries diagnostics: missing markers, derivation chains, or a
/// remark that a PASS is vacuous.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyResult {
    pub property: String,
    pub verdict: Verdict,
    pub notes: Vec<String>,
    pub states_visited: usize,
    pub depth: usize,
}

impl PropertyResult {
    pub fn new(property: impl Into<String>, verdict: Verdict) -> Self {
        PropertyResult { property: property.into(), verdict, notes: Vec::new(), states_visited: 0, depth: 0 }
    }

    pub fn pass(property: impl Into<String>) -> Self {
        Self::new(property, Verdict::Pass)
    }

    pub fn fail(property: impl Into<String>) -> Self {
        Self::new(property, Verdict::Fail)
    }

    pub fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }

    pub fn is_pass(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}
