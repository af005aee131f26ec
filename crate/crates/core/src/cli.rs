//! `saelab`: run scenarios, explore the state space, compare presets.
//!
//! Exit codes: 0 when every expectation holds, 2 on a mismatch, 1 on usage
//! or input errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::explorer::{explore, Bounds, Exploration, Property, Setup, DEFAULT_ADVERSARY_BOUND, DEFAULT_MAX_STATES, DEFAULT_STEP_BOUND};
use crate::group::GroupParams;
use crate::mode::{ModeFlags, FLAG_NAMES};
use crate::netsim::run;
use crate::scenarios::{evaluate, export_all, family, mode_label, run_and_check, Scenario};
use crate::verdict::Verdict;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_MISMATCH: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "saelab", version, about = "SAE handshake simulator and bounded explorer")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run a scenario and check its expectations.
    Run(RunArgs),
    /// Explore every adversary schedule within bounds and check properties.
    Explore(ExploreArgs),
    /// Run a scenario under both presets and tabulate what each patch changes.
    Diff(RunArgs),
    /// Write every built-in scenario as TOML into --out.
    Export {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Jsonl,
    Summary,
}

#[derive(Args, Debug)]
struct Common {
    /// Built-in scenario (or family, e.g. pid_matrix).
    #[arg(long, conflicts_with = "scenario_file")]
    scenario: Option<String>,
    /// Scenario in TOML.
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    /// Preset: spec2020 or patched.
    #[arg(long)]
    mode: Option<String>,
    /// Override one mode flag, e.g. --flag reflection_guard=true. Repeatable.
    #[arg(long = "flag", value_name = "NAME=BOOL")]
    flags: Vec<String>,
    /// Group label for every device.
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "summary")]
    format: Format,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ExploreArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated properties; `all` and `reachability` expand.
    #[arg(long, default_value = "all")]
    props: String,
    #[arg(long, default_value_t = DEFAULT_ADVERSARY_BOUND)]
    adv_bound: u32,
    #[arg(long, default_value_t = DEFAULT_STEP_BOUND)]
    step_bound: u32,
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
    /// Expected verdict, e.g. --expect progress=FAIL. Repeatable.
    #[arg(long = "expect", value_name = "PROPERTY=VERDICT")]
    expect: Vec<String>,
}

#[derive(Debug)]
struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
/// Normal output goes to `out`, diagnostics to standard error.
pub fn main_with<I, T>(args: I, out: &mut String) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if e.use_stderr() {
                eprint!("{e}");
            } else {
                out.push_str(&e.to_string());
            }
            return code;
        }
    };
    let r = match cli.cmd {
        Cmd::Run(a) => cmd_run(&a.common, out),
        Cmd::Explore(a) => cmd_explore(&a, out),
        Cmd::Diff(a) => cmd_diff(&a.common, out),
        Cmd::Export { out: dir } => export_all(&dir).map(|names| {
            for n in names {
                let _ = writeln!(out, "{}", dir.join(n).display());
            }
            EXIT_OK
        }).map_err(Usage::from),
    };
    r.unwrap_or_else(|Usage(msg)| {
        eprintln!("error: {msg}");
        EXIT_USAGE
    })
}

fn scenarios(c: &Common, default: Option<&str>) -> Result<Vec<Scenario>, Usage> {
    let mut list = match (&c.scenario, &c.scenario_file) {
        (_, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
            vec![Scenario::from_toml(&text)?]
        }
        (Some(name), None) => family(name).ok_or_else(|| Usage(format!("unknown scenario `{name}`")))?,
        (None, None) => match default {
            Some(name) => family(name).expect("built-in"),
            None => return Err(Usage("one of --scenario or --scenario-file is required".into())),
        },
    };
    if let Some(g) = &c.group {
        GroupParams::by_label(g)?;
    }
    for s in &mut list {
        let mut m = match &c.mode {
            Some(p) => ModeFlags::preset(p).ok_or_else(|| Usage(format!("unknown mode `{p}` (spec2020 or patched)")))?,
            None => s.mode_flags()?,
        };
        for f in &c.flags {
            let (name, value) = f.split_once('=').ok_or_else(|| Usage(format!("--flag wants NAME=BOOL, got `{f}`")))?;
            let value: bool = value.parse().map_err(|_| Usage(format!("--flag {name}: `{value}` is not a boolean")))?;
            m.set(name, value).map_err(|e| Usage(format!("{e}; known: {}", FLAG_NAMES.join(", "))))?;
        }
        s.set_mode(m);
        if let Some(g) = &c.group {
            s.group = Some(g.clone());
        }
        if let Some(seed) = c.seed {
            s.seed = seed;
        }
    }
    Ok(list)
}

fn out_dir(c: &Common) -> Result<Option<&Path>, Usage> {
    if let Some(d) = &c.out {
        std::fs::create_dir_all(d).map_err(|e| Usage(format!("{}: {e}", d.display())))?;
    }
    Ok(c.out.as_deref())
}

fn write(dir: &Path, file: &str, text: &str) -> Result<String, Usage> {
    let p = dir.join(file);
    std::fs::write(&p, text).map_err(|e| Usage(format!("{}: {e}", p.display())))?;
    Ok(p.display().to_string())
}

fn cmd_run(c: &Common, out: &mut String) -> Result<i32, Usage> {
    let list = scenarios(c, None)?;
    let dir = out_dir(c)?;
    let mut ok = true;
    for s in &list {
        let rep = run_and_check(s)?;
        ok &= rep.holds();
        if let Some(d) = dir {
            write(d, &format!("{}.{}.jsonl", s.name, rep.mode), &rep.trace.to_jsonl())?;
        }
        match c.format {
            Format::Jsonl => out.push_str(&rep.trace.to_jsonl()),
            Format::Summary => {
                let status = if rep.holds() { "ok" } else { "MISMATCH" };
                let _ = writeln!(out, "{} [{}]: {} ({} rounds, {} records)", s.name, rep.mode, status, rep.trace.round, rep.trace.records.len());
                for o in &rep.outcomes {
                    let mark = if o.holds() { " " } else { "!" };
                    let _ = writeln!(out, " {mark} {:<24} expected {:<6} observed {}", o.check, o.expected, o.observed);
                }
            }
        }
    }
    Ok(if ok { EXIT_OK } else { EXIT_MISMATCH })
}

fn parse_verdict(s: &str) -> Result<Verdict, Usage> {
    match s.to_ascii_uppercase().as_str() {
        "PASS" => Ok(Verdict::Pass),
        "FAIL" => Ok(Verdict::Fail),
        "BOUND_REACHED" => Ok(Verdict::BoundReached),
        _ => Err(Usage(format!("unknown verdict `{s}`"))),
    }
}

fn cmd_explore(a: &ExploreArgs, out: &mut String) -> Result<i32, Usage> {
    let props = Property::parse_list(&a.props).map_err(Usage)?;
    let mut expect = Vec::new();
    for e in &a.expect {
        let (p, v) = e.split_once('=').ok_or_else(|| Usage(format!("--expect wants PROPERTY=VERDICT, got `{e}`")))?;
        let p = Property::parse_list(p).map_err(Usage)?;
        let v = parse_verdict(v)?;
        expect.extend(p.into_iter().map(|p| (p, v)));
    }
    let list = scenarios(&a.common, Some("honest"))?;
    let [scn] = list.as_slice() else { return Err(Usage("explore takes a single scenario".into())) };
    let bounds = Bounds { adversary: a.adv_bound, steps: a.step_bound, max_states: a.max_states, prune: true };
    let e = explore(&Setup::new(scn)?, &bounds, &props)?;
    let dir = out_dir(&a.common)?;
    let label = mode_label(&scn.mode_flags()?);
    let mut lines = String::new();
    for r in &e.results {
        let file = match (&r.counterexample, dir) {
            (Some(cex), Some(d)) => {
                let stem = format!("{}.{}.{}", scn.name, label, r.result.property);
                write(d, &format!("{stem}.trace.jsonl"), &cex.trace.to_jsonl())?;
                Some(write(d, &format!("{stem}.cex.toml"), &cex.scenario.to_toml())?)
            }
            _ => None,
        };
        let _ = writeln!(lines, "{}", r.to_json(file.as_deref()));
    }
    if let Some(d) = dir {
        write(d, &format!("{}.{}.results.jsonl", scn.name, label), &lines)?;
    }
    match a.common.format {
        Format::Jsonl => out.push_str(&lines),
        Format::Summary => summary(out, scn, &label, &e),
    }
    let mut ok = true;
    for (p, v) in expect {
        let got = e.get(p).ok_or_else(|| Usage(format!("--expect names {}, which was not explored", p.name())))?.result.verdict;
        if got != v {
            eprintln!("{}: expected {v}, got {got}", p.name());
            ok = false;
        }
    }
    Ok(if ok { EXIT_OK } else { EXIT_MISMATCH })
}

fn summary(out: &mut String, scn: &Scenario, label: &str, e: &Exploration) {
    let reach = match e.exhaustive {
        Some(k) => format!("exhaustive up to {k} adversary actions"),
        None => "no budget exhausted".into(),
    };
    let _ = writeln!(out, "{} [{}]: {} states, depth {}, {}", scn.name, label, e.states, e.depth, reach);
    for r in &e.results {
        let _ = writeln!(out, "  {:<24} {:<13} {}", r.result.property, r.result.verdict.to_string(), r.result.notes.join("; "));
        if let Some(cex) = &r.counterexample {
            for s in &cex.scenario.adversary {
                let _ = writeln!(out, "      {}", serde_json::to_string(s).expect("step serialises"));
            }
        }
    }
}

/// One comparison row: a check observed under each preset, and the flags
/// that alone move spec2020 to the patched outcome.
struct Row {
    scenario: String,
    check: String,
    spec: String,
    patched: String,
    flags: Vec<String>,
}

fn diff_rows(s: &Scenario) -> Result<(Vec<Row>, bool), Usage> {
    let spec = s.with_mode(ModeFlags::spec2020());
    let patched = s.with_mode(ModeFlags::patched());
    let (rs, rp) = (run_and_check(&spec)?, run_and_check(&patched)?);
    let ok = rs.holds() && rp.holds();
    let checks: Vec<String> = if s.findings.is_empty() {
        let empty = Default::default();
        let e = |m: &str| s.expectations.get(m).unwrap_or(&empty);
        e("spec2020").keys().filter(|k| e("patched").contains_key(*k)).cloned().collect()
    } else {
        s.findings.clone()
    };
    let mut rows = Vec::new();
    for check in checks {
        let a = evaluate(&spec, &rs.trace, &check)?;
        let b = evaluate(&patched, &rp.trace, &check)?;
        let mut flags = Vec::new();
        if a != b {
            for f in FLAG_NAMES {
                let mut m = ModeFlags::spec2020();
                m.set(f, true).expect("known flag");
                let one = s.with_mode(m);
                if evaluate(&one, &run(&one)?, &check)? == b {
                    flags.push(f.to_string());
                }
            }
        }
        rows.push(Row { scenario: s.name.clone(), check, spec: a, patched: b, flags });
    }
    Ok((rows, ok))
}

fn cmd_diff(c: &Common, out: &mut String) -> Result<i32, Usage> {
    if c.mode.is_some() || !c.flags.is_empty() {
        return Err(Usage("diff always compares spec2020 with patched; drop --mode/--flag".into()));
    }
    let list = scenarios(c, None)?;
    let mut rows = Vec::new();
    let mut ok = true;
    for s in &list {
        let (r, holds) = diff_rows(s)?;
        rows.extend(r);
        ok &= holds;
    }
    let flag_text = |r: &Row| match (r.spec == r.patched, r.flags.is_empty()) {
        (true, _) => "-".to_string(),
        (false, true) => "combined".to_string(),
        (false, false) => r.flags.join("|"),
    };
    let mut lines = String::new();
    for r in &rows {
        let v = json!({"scenario": r.scenario, "finding": r.check, "spec2020": r.spec, "patched": r.patched, "flag": flag_text(r)});
        let _ = writeln!(lines, "{v}");
    }
    if let Some(d) = out_dir(c)? {
        let name = c.scenario.clone().unwrap_or_else(|| list[0].name.clone());
        write(d, &format!("{name}.diff.jsonl"), &lines)?;
    }
    match c.format {
        Format::Jsonl => out.push_str(&lines),
        Format::Summary => {
            let w = rows.iter().map(|r| r.scenario.len()).max().unwrap_or(8).max(8);
            let _ = writeln!(out, "{:<w$}  {:<22} {:<10} {:<10} flag", "scenario", "finding", "spec2020", "patched");
            for r in &rows {
                let _ = writeln!(out, "{:<w$}  {:<22} {:<10} {:<10} {}", r.scenario, r.check, r.spec, r.patched, flag_text(r));
            }
            if !ok {
                let _ = writeln!(out, "expectation mismatch in at least one preset");
            }
        }
    }
    Ok(if ok { EXIT_OK } else { EXIT_MISMATCH })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String) {
        let mut out = String::new();
        let code = main_with(std::iter::once("saelab").chain(args.iter().copied()), &mut out);
        (code, out)
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(call(&["run", "--scenario", "nope"]).0, EXIT_USAGE);
        assert_eq!(call(&["run", "--scenario", "honest", "--bogus"]).0, EXIT_USAGE);
        assert_eq!(call(&["run"]).0, EXIT_USAGE);
        assert_eq!(call(&["run", "--scenario", "honest", "--mode", "x"]).0, EXIT_USAGE);
        assert_eq!(call(&["run", "--scenario", "honest", "--flag", "nope=true"]).0, EXIT_USAGE);
        assert_eq!(call(&["run", "--scenario", "honest", "--flag", "auth_event=maybe"]).0, EXIT_USAGE);
        assert_eq!(call(&["run", "--scenario", "honest", "--group", "p256"]).0, EXIT_USAGE);
        assert_eq!(call(&["explore", "--adv-bound", "-1"]).0, EXIT_USAGE);
        assert_eq!(call(&["explore", "--props", "liveness"]).0, EXIT_USAGE);
        assert_eq!(call(&["diff", "--scenario", "honest", "--mode", "patched"]).0, EXIT_USAGE);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out) = call(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("explore"));
    }

    #[test]
    fn run_reports_expectations() {
        let (code, out) = call(&["run", "--scenario", "reflection", "--mode", "spec2020"]);
        assert_eq!(code, EXIT_OK, "{out}");
        assert!(out.contains("reflection [spec2020]: ok"));
        let (code, out) = call(&["run", "--scenario", "reflection", "--mode", "patched", "--format", "jsonl"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
    }

    #[test]
    fn mismatch_exits_two() {
        let mut s = crate::scenarios::library::honest();
        s.expect("spec2020", "accepted:L", false);
        let path = std::env::temp_dir().join(format!("saelab-mismatch-{}.toml", std::process::id()));
        std::fs::write(&path, s.to_toml()).unwrap();
        let (code, out) = call(&["run", "--scenario-file", path.to_str().unwrap()]);
        std::fs::remove_file(&path).unwrap();
        assert_eq!(code, EXIT_MISMATCH);
        assert!(out.contains("MISMATCH"));
        let (code, _) = call(&["explore", "--mode", "patched", "--props", "reachable_accepted", "--adv-bound", "0", "--expect", "reachable_accepted=FAIL"]);
        assert_eq!(code, EXIT_MISMATCH);
    }

    #[test]
    fn diff_names_the_patch() {
        let (code, out) = call(&["diff", "--scenario", "deadlock", "--format", "jsonl"]);
        assert_eq!(code, EXIT_OK, "{out}");
        let stuck = out.lines().find(|l| l.contains("\"stuck_committed\"")).unwrap();
        assert!(stuck.contains("\"spec2020\":\"true\"") && stuck.contains("\"patched\":\"false\""), "{stuck}");
        assert!(stuck.contains("deadlock_patch"), "{stuck}");

        let (_, out) = call(&["diff", "--scenario", "reflection", "--format", "jsonl"]);
        let auth = out.lines().find(|l| l.contains("\"auth_weak\"")).unwrap();
        assert!(auth.contains("FAIL") && auth.contains("reflection_guard"), "{auth}");

        let (code, out) = call(&["diff", "--scenario", "pid_matrix", "--format", "jsonl"]);
        assert_eq!(code, EXIT_OK, "{out}");
        assert_eq!(out.lines().count(), 8);
    }
}
