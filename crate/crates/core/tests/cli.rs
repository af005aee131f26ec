//! The `saelab` binary end to end: exit codes, output files, replay.

use std::path::Path;
use std::process::{Command, Output};

use sae_core::scenarios::{all, Scenario};

fn saelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saelab")).args(args).output().expect("saelab runs")
}

fn code(args: &[&str]) -> i32 {
    saelab(args).status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn reflection_runs_match_expectations() {
    assert_eq!(code(&["run", "--scenario", "reflection", "--mode", "spec2020"]), 0);
    assert_eq!(code(&["run", "--scenario", "reflection", "--mode", "patched"]), 0);
}

#[test]
fn usage_errors() {
    assert_eq!(code(&["run", "--scenario", "no_such_thing"]), 1);
    assert_eq!(code(&["run", "--scenario", "honest", "--verbose"]), 1);
    assert_eq!(code(&["explore", "--adv-bound", "-1"]), 1);
    assert_eq!(code(&["explore", "--format", "xml"]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["run", "--scenario-file", "/nonexistent/x.toml"]), 1);
    let o = saelab(&["run", "--scenario", "no_such_thing"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_thing"));
}

#[test]
fn every_builtin_scenario_exits_zero_in_both_presets() {
    for s in all() {
        for mode in ["spec2020", "patched"] {
            let o = saelab(&["run", "--scenario", &s.name, "--mode", mode]);
            assert_eq!(o.status.code(), Some(0), "{} [{mode}]\n{}", s.name, stdout(&o));
        }
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn identical_invocations_write_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = d.path().to_str().unwrap();
        assert_eq!(code(&["run", "--scenario", "pid_matrix", "--mode", "spec2020", "--seed", "42", "--out", out]), 0);
        assert_eq!(code(&["run", "--scenario", "deadlock", "--out", out, "--format", "jsonl"]), 0);
        let e = &["explore", "--mode", "spec2020", "--props", "progress,reachability", "--adv-bound", "1", "--step-bound", "12", "--out", out];
        assert_eq!(code(e), 0);
        assert_eq!(code(&["diff", "--scenario", "reflection", "--out", out]), 0);
    }
    // Result rows name the counterexample file, so they differ only by directory.
    let strip = |d: &tempfile::TempDir| -> Vec<(String, String)> {
        let prefix = d.path().to_str().unwrap();
        files(d.path()).into_iter().map(|(n, b)| (n, String::from_utf8(b).unwrap().replace(prefix, "OUT"))).collect()
    };
    let (fa, fb) = (strip(&a), strip(&b));
    assert_eq!(fa.len(), 8 + 1 + 3 + 1);
    assert_eq!(fa, fb);
}

#[test]
fn explore_writes_replayable_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = saelab(&[
        "explore", "--mode", "spec2020", "--props", "progress", "--adv-bound", "2", "--out", out, "--format", "jsonl",
        "--expect", "progress=FAIL",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let row: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert_eq!(row["property"], "progress");
    assert_eq!(row["verdict"], "FAIL");
    let cex = row["counterexample_file"].as_str().unwrap();
    let scn = Scenario::from_toml(&std::fs::read_to_string(cex).unwrap()).unwrap();
    assert_eq!(scn.adversary.len(), 1);
    assert_eq!(code(&["run", "--scenario-file", cex]), 0);
    let trace = std::fs::read_to_string(cex.replace(".cex.toml", ".trace.jsonl")).unwrap();
    assert!(trace.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
}

#[test]
fn patched_explore_finds_nothing_at_small_bounds() {
    let o = saelab(&["explore", "--mode", "patched", "--props", "all", "--adv-bound", "1", "--step-bound", "16", "--format", "jsonl"]);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 10);
    for r in rows {
        assert!(r["verdict"] == "PASS" || r["verdict"] == "BOUND_REACHED", "{r}");
    }
}

#[test]
fn diff_tables() {
    let o = saelab(&["diff", "--scenario", "deadlock"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row = text.lines().find(|l| l.contains("stuck_committed")).unwrap();
    assert!(row.contains("true") && row.contains("false") && row.contains("deadlock_patch"), "{row}");

    let o = saelab(&["diff", "--scenario", "pid_matrix"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("pid_")).count(), 8);

    let o = saelab(&["diff", "--scenario", "reflection"]);
    let row = stdout(&o).lines().find(|l| l.contains("auth_weak")).unwrap().to_string();
    assert!(row.contains("FAIL") && row.contains("PASS") && row.contains("reflection_guard"), "{row}");
}

#[test]
fn export_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["export", "--out", dir.path().to_str().unwrap()]), 0);
    for s in all() {
        let text = std::fs::read_to_string(dir.path().join(format!("{}.toml", s.name))).unwrap();
        assert_eq!(Scenario::from_toml(&text).unwrap(), s);
    }
}
