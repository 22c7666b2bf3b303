use std::fs;
use std::process::Command;

fn gaugeopt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gaugeopt"))
}

const CONFIG: &str = r#"{
    "body": {"kind": "box", "half_widths": [1.0, 0.5]},
    "losses": {"family": "linear", "noise": 0.1, "lipschitz": 1.0},
    "algorithm": "algorithm1",
    "estimator": "polytope_face",
    "horizon": 300,
    "seed": 3
}"#;

#[test]
fn run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("out");
    let status = gaugeopt()
        .args(["run", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = fs::read_to_string(out.join("rounds.csv")).unwrap();
    assert_eq!(csv.lines().count(), 301);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 9);
    assert_eq!(summary["version"], 1);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, CONFIG).unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let ok = gaugeopt()
            .args(["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(ok.success());
        outputs.push(fs::read(out.join("rounds.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn sweep_and_negative_control() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let res = gaugeopt()
        .args(["sweep", "--negative-control", "100", "--horizons", "100,200,400,800", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("log-log slope"));
    assert!(out.join("T800").join("summary.json").exists());
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, CONFIG.replace("300", "0")).unwrap();
    let res = gaugeopt().args(["run", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("horizon"));
    let res = gaugeopt().args(["run"]).output().unwrap();
    assert!(!res.status.success());
    let res = gaugeopt().args(["run", "--negative-control", "10", "--full-interval-scan", "--out"]).output().unwrap();
    assert!(!res.status.success());
}

#[test]
fn verify_quick_passes() {
    let res = gaugeopt().args(["verify", "--quick"]).output().unwrap();
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(res.status.success(), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")));
}
