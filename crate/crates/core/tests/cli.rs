use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn evgrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evgrid")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_accepts_the_bundled_scenarios() {
    for name in ["corridor.json", "corridor_fast.json", "pt6.json"] {
        let o = evgrid(&["validate", scenario(name).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).starts_with("ok: "));
    }
}

#[test]
fn invalid_documents_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"nodes": ["s"], "edges": [], "stations": [], "evs": [{"id": "v", "s": "s", "t": "x", "b": 1, "b_lo": 0.1, "b_hi": 2}]}"#).unwrap();
    let o = evgrid(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    std::fs::write(&bad, "not json").unwrap();
    assert_eq!(evgrid(&["validate", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn enumeration_over_budget_exits_with_budget_code() {
    let o = evgrid(&["--budget", "10", "enumerate", scenario("corridor.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn stochastic_modes_require_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = evgrid(&["--out", dir.path().to_str().unwrap(), "sweep", "--mode", "ne", "--fleet", "2", scenario("corridor.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_writes_json_that_parses() {
    let dir = tempfile::tempdir().unwrap();
    let o = evgrid(&["--out", dir.path().to_str().unwrap(), "solve", scenario("corridor.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["converged"], true);
    let file: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve.json")).unwrap()).unwrap();
    assert_eq!(file, v);
}

#[test]
fn hoeffding_table_sizes_the_fleet() {
    let dir = tempfile::tempdir().unwrap();
    let o = evgrid(&["--out", dir.path().to_str().unwrap(), "hoeffding", scenario("corridor.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("405"));
    assert!(dir.path().join("results.csv").exists());
}

#[test]
fn sweeps_are_reproducible_across_runs() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let o = evgrid(&[
            "--seed", "3", "--out", dir.path().to_str().unwrap(), "sweep", "--mode", "poa", "--fleet", "2..3",
            "--pricing", "2,4/3", scenario("corridor.json").to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(dir.path().join("results.csv")).unwrap()
    };
    let first = run();
    assert_eq!(first.lines().filter(|l| !l.starts_with('#')).count(), 5);
    assert_eq!(first, run());
}
