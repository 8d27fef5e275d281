use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect()
}

fn misgrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_misgrid")).args(args).output().unwrap()
}

fn build(dir: &Path) -> PathBuf {
    let out = dir.join("s.json");
    let o = misgrid(&[
        "build-scenario",
        "--case",
        data("case30.m").to_str().unwrap(),
        "--edgelist",
        data("social_4039.txt").to_str().unwrap(),
        "--capacity",
        "1.3",
        "--rng-seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn attack_writes_summary_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let s = build(dir.path());
    let (summary, trace) = (dir.path().join("a.json"), dir.path().join("t.jsonl"));
    let o = misgrid(&[
        "attack",
        "--scenario",
        s.to_str().unwrap(),
        "--strategy",
        "gsa",
        "--trials",
        "7",
        "--samples",
        "200",
        "--out",
        summary.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(v["strategy"], "gsa");
    assert_eq!(v["trials"], 7);
    assert!(v["seeds"].as_array().unwrap().len() <= 5);
    let pct = v["mean_failed_pct"].as_f64().unwrap();
    assert!((0.0..=100.0).contains(&pct));
    let lines = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(lines.lines().count(), 7);
    for l in lines.lines() {
        let t: serde_json::Value = serde_json::from_str(l).unwrap();
        assert!(t["yield"].as_f64().unwrap() <= 1.0);
    }
}

#[test]
fn report_lists_every_demand_bus() {
    let dir = tempfile::tempdir().unwrap();
    let s = build(dir.path());
    let o = misgrid(&["report", "--scenario", s.to_str().unwrap(), "--samples", "100"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["buses"], 30);
    assert_eq!(v["demand_buses"], 20);
    assert_eq!(v["impacts"].as_array().unwrap().len(), 20);
}

#[test]
fn exit_codes() {
    // Usage errors.
    assert_eq!(misgrid(&["attack", "--strategy", "nope"]).status.code(), Some(1));
    assert_eq!(misgrid(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(misgrid(&["--help"]).status.code(), Some(0));
    // Unreadable and malformed input.
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.json");
    assert_eq!(misgrid(&["report", "--scenario", missing.to_str().unwrap()]).status.code(), Some(2));
    let bad = dir.path().join("bad.m");
    std::fs::write(&bad, "mpc.bus = [1 3 0 0\n").unwrap();
    let o = misgrid(&[
        "build-scenario",
        "--case",
        bad.to_str().unwrap(),
        "--edgelist",
        data("social_4039.txt").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    // Out-of-range parameters.
    let s = build(dir.path());
    assert_eq!(misgrid(&["report", "--scenario", s.to_str().unwrap(), "--alpha", "1.5"]).status.code(), Some(1));
}
