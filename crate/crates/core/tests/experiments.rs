use std::fs;

use gaugeopt::bench::run::{CSV_FILE, CSV_HEADER, SUMMARY_FILE};
use gaugeopt::bench::{
    run_experiment, run_to_dir, sweep, write_outputs, AlgorithmKind, ExperimentConfig, LossFamily, SegmentSpec, Summary,
};
use gaugeopt::learner::Schedule;
use gaugeopt::EstimatorKind;

const MINIMAL: &str = r#"{
    "name": "smoke",
    "body": {"kind": "ball", "dim": 2},
    "losses": {"family": "linear", "segments": [{"target": [1.0, 0.0]}]},
    "algorithm": "algorithm1",
    "horizon": 100,
    "seed": 4
}"#;

fn piecewise_quadratic(horizon: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_json(MINIMAL).unwrap();
    c.horizon = horizon;
    c.algorithm = AlgorithmKind::Flh;
    c.schedule = Schedule::StronglyConvex;
    c.losses.family = LossFamily::Quadratic;
    c.losses.segments = vec![
        SegmentSpec { start: None, fraction: None, target: Some(vec![0.5, 0.0]) },
        SegmentSpec { start: Some(horizon / 2 + 1), fraction: None, target: Some(vec![-0.5, 0.0]) },
    ];
    c
}

#[test]
fn minimal_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
    let report = run_to_dir(&cfg, dir.path()).unwrap();
    let csv = fs::read_to_string(dir.path().join(CSV_FILE)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 101);
    assert_eq!(lines[0], CSV_HEADER);
    assert!(lines[1].starts_with("1,"));
    assert!(!csv.contains('\r'));

    let summary: Summary = serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary, report.summary);
    assert_eq!(summary.seed, 4);
    assert_eq!(summary.config_hash, cfg.hash());
    // comparator (-1, 0) on f = x_1 + 2
    assert_eq!(summary.comparator.value, 100.0);
    let total: f64 = report.records.iter().map(|r| r.loss).sum();
    assert!((summary.cumulative_regret - (total - 100.0)).abs() < 1e-9);
    let calls: u64 = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(calls, summary.total_oracle_calls);
}

#[test]
fn repeated_runs_are_byte_identical() {
    for estimator in [EstimatorKind::FiniteDifference, EstimatorKind::Randomized] {
        let mut cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        cfg.estimator = estimator;
        cfg.losses.noise = 0.2;
        cfg.losses.segments[0].target = None;
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_to_dir(&cfg, a.path()).unwrap();
        run_to_dir(&cfg, b.path()).unwrap();
        for f in [CSV_FILE, SUMMARY_FILE] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
    }
}

#[test]
fn face_and_smoothed_estimators_run_on_boxes() {
    for estimator in [EstimatorKind::PolytopeFace, EstimatorKind::SmoothedPolytope] {
        let mut cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        cfg.body = gaugeopt::bench::BodySpec::Box { half_widths: vec![1.0, 0.5] };
        cfg.estimator = estimator;
        let report = run_experiment(&cfg).unwrap();
        assert!(report.records.iter().all(|r| report.body.is_member(&r.played) && r.calls <= r.budget));
    }
}

#[test]
fn flh_summary_has_segment_regrets() {
    let report = run_experiment(&piecewise_quadratic(512)).unwrap();
    let s = &report.summary;
    assert_eq!(s.segment_regrets.len(), 2);
    assert_eq!((s.segment_regrets[1].start, s.segment_regrets[1].end), (257, 512));
    assert!(s.worst_interval.worst.regret >= s.segment_regrets[1].regret);
    assert!(s.max_experts > 1);
}

#[test]
fn full_scan_dominates_dyadic() {
    let mut cfg = piecewise_quadratic(200);
    cfg.algorithm = AlgorithmKind::Algorithm1;
    let dyadic = run_experiment(&cfg).unwrap().summary.worst_interval;
    cfg.full_interval_scan = true;
    let full = run_experiment(&cfg).unwrap().summary.worst_interval;
    assert!(full.full && !dyadic.full);
    assert_eq!(full.intervals, 200 * 201 / 2);
    assert!(full.worst.regret >= dyadic.worst.regret);
}

#[test]
fn failed_write_leaves_nothing_behind() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&ExperimentConfig::from_json(MINIMAL).unwrap()).unwrap();
    // a directory where the summary file should go makes the second write fail
    fs::create_dir(dir.path().join(SUMMARY_FILE)).unwrap();
    assert!(write_outputs(&report, dir.path()).is_err());
    assert!(!dir.path().join(CSV_FILE).exists());
}

#[test]
fn sweep_writes_one_directory_per_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::negative_control(100, 2);
    cfg.losses.segments.truncate(1);
    let report = sweep(&cfg, &[100, 200, 400, 800], Some(dir.path())).unwrap();
    assert_eq!(report.points.len(), 4);
    for h in [100, 200, 400, 800] {
        assert!(dir.path().join(format!("T{h}")).join(CSV_FILE).exists());
    }
    assert!(dir.path().join("sweep.json").exists());
    let fit = report.fit.unwrap();
    assert!(fit.log_log.slope > 0.2 && fit.log_log.slope < 0.8);
}

#[test]
fn invalid_configs_fail_before_running() {
    let mut cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
    cfg.losses.lipschitz = Some(0.5);
    assert!(run_experiment(&cfg).is_err());
    let mut cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
    cfg.body = gaugeopt::bench::BodySpec::Ball { dim: 3, radius: 1.0 };
    assert!(run_experiment(&cfg).is_err());
    let mut cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
    cfg.estimator = EstimatorKind::PolytopeFace;
    assert!(run_experiment(&cfg).is_err());
}
