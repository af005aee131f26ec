//! Scripted scenarios reproducing each finding, with expected outcomes.

mod checks;
pub mod library;
mod model;

use std::path::Path;

pub use checks::{evaluate, evaluate_all, Outcome};
pub use library::{all, by_name, family};
pub use model::{
    mode_label, ActionKind, DeviceSpec, Expected, PasswordSpec, Scenario, ScenarioError, ScriptStep, SmeKind, SmeStep,
    DEFAULT_ROUNDS, DEFAULT_SEED,
};

use crate::netsim::{run, SimError, Trace};

/// A scenario run plus its expectation table for the mode it ran in.
#[derive(Debug)]
pub struct Report {
    pub scenario: String,
    pub mode: String,
    pub trace: Trace,
    pub outcomes: Vec<Outcome>,
}

impl Report {
    pub fn holds(&self) -> bool {
        self.outcomes.iter().all(Outcome::holds)
    }
}

pub fn run_and_check(scn: &Scenario) -> Result<Report, SimError> {
    let trace = run(scn)?;
    let mode = scn.mode_label()?;
    let outcomes = evaluate_all(scn, &mode, &trace)?;
    Ok(Report { scenario: scn.name.clone(), mode, trace, outcomes })
}

/// Writes every built-in scenario as `<name>.toml` into `dir`.
pub fn export_all(dir: &Path) -> std::io::Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for s in all() {
        let file = format!("{}.toml", s.name);
        std::fs::write(dir.join(&file), s.to_toml())?;
        names.push(file);
    }
    Ok(names)
}
