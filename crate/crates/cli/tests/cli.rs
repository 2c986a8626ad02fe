use std::fs;
use std::path::Path;
use std::process::Command;

use qplab_cli::config::{EnergyGrid, PotentialSpec};
use qplab_cli::{run, CliError, RunConfig, RunOptions};

fn opts(dir: &Path, name: &str) -> RunOptions {
    RunOptions {
        jobs: Some(1),
        out: Some(dir.join(name).display().to_string()),
        no_cache: false,
        cache_dir: Some(dir.join("cache")),
        quiet: true,
    }
}

fn accel(energies: Vec<f64>) -> RunConfig {
    let mut cfg = RunConfig::from_json(r#"{"task": "accel", "potential": {"kind": "amo", "lambda": 2.0}}"#).unwrap();
    cfg.params.energies = Some(EnergyGrid::Values(energies));
    cfg
}

fn qplab(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qplab")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"task": "lyap", "potential": {"kind": "amo", "lambda": 2.0}, "params": {"epz": 0.1}}"#).unwrap();
    let err = RunConfig::from_json(&fs::read_to_string(&path).unwrap()).unwrap_err();
    assert!(matches!(err, CliError::Config(_)));
    assert!(err.to_string().contains("epz"), "{err}");

    let (code, stderr) = qplab(&["lyap", "--config", path.to_str().unwrap(), "--no-cache", "--quiet"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("epz"), "{stderr}");

    let (code, _) = qplab(&["no-such-task", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn cache_hit_reproduces_the_payload() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = accel(vec![0.5, 10.0]);
    let first = run(&cfg, &opts(dir.path(), "a")).unwrap();
    let second = run(&cfg, &opts(dir.path(), "b")).unwrap();
    assert!(!first.cache_hit);
    assert!(second.cache_hit);
    assert_eq!(first.config_hash, second.config_hash);
    assert_eq!(first.summary, second.summary);
    assert_eq!(fs::read(&first.csv_path).unwrap(), fs::read(&second.csv_path).unwrap());
    assert_eq!(first.csv_sha256, second.csv_sha256);
}

#[test]
fn config_hash_ignores_execution_settings() {
    let mut a = accel(vec![0.5]);
    let h = qplab_cli::config_hash(&a);
    a.jobs = Some(7);
    a.out = Some("elsewhere".into());
    assert_eq!(qplab_cli::config_hash(&a), h);
    a.alpha = "silver".into();
    assert_ne!(qplab_cli::config_hash(&a), h);
}

#[test]
fn config_round_trips() {
    let mut cfg = accel(vec![0.25, 1.5]);
    cfg.potential = PotentialSpec::Geometric { lambda: 3.0, ratio: 0.3 };
    cfg.params.degrees = Some(vec![2, 3, 4]);
    let back = RunConfig::from_json(&cfg.to_json()).unwrap();
    assert_eq!(back.to_json(), cfg.to_json());
    assert_eq!(qplab_cli::config_hash(&back), qplab_cli::config_hash(&cfg));
}

#[test]
fn sweep_keeps_good_points_and_records_the_bad_one() {
    let dir = tempfile::tempdir().unwrap();
    let good = [2.476547, 2.4706];
    let mut cfg = RunConfig::from_json(
        r#"{"task": "sweep", "potential": {"kind": "stock_d2_non_even"}, "params": {"sweep_task": "bloch"}}"#,
    )
    .unwrap();
    cfg.params.energies = Some(EnergyGrid::Values(vec![good[0], -1.8493421132634396, good[1]]));
    let env = run(&cfg, &opts(dir.path(), "sweep")).unwrap();
    assert!(env.has_point_errors());
    let errors = env.summary["errors"].as_array().unwrap();
    assert_eq!(errors.len(), 1);
    assert_eq!(errors[0]["index"], 1);

    let csv = fs::read_to_string(&env.csv_path).unwrap();
    let energies: std::collections::BTreeSet<String> =
        csv.lines().skip(1).map(|l| l.split(',').next().unwrap().to_string()).collect();
    assert_eq!(energies.len(), 2);

    // each good point on its own gives the same lines as inside the sweep
    for e in good {
        let mut single = cfg.clone();
        single.task = "bloch".into();
        single.params.sweep_task = None;
        single.params.energies = Some(EnergyGrid::Values(vec![e]));
        let one = run(&single, &opts(dir.path(), &format!("single{e}"))).unwrap();
        assert!(one.cache_hit, "sub-run was not cached by the sweep");
        let body = fs::read_to_string(&one.csv_path).unwrap();
        assert!(body.lines().skip(1).all(|l| csv.contains(l)));
    }
}

#[test]
fn partial_failure_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(
        &path,
        r#"{"task": "bloch", "potential": {"kind": "stock_d2_non_even"},
            "params": {"energies": {"values": [2.476547, -1.8493421132634396]}}}"#,
    )
    .unwrap();
    let out = dir.path().join("rot");
    let cache = dir.path().join("cache");
    let status = Command::new(env!("CARGO_BIN_EXE_qplab"))
        .args(["bloch", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"])
        .env("QPLAB_CACHE", &cache)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
    assert!(out.with_extension("csv").exists());
    assert!(cache.read_dir().unwrap().next().is_some());
}

#[test]
fn length_one_axis_matches_a_plain_run() {
    let dir = tempfile::tempdir().unwrap();
    let plain = accel(vec![0.5]);
    let mut sweep = plain.clone();
    sweep.task = "sweep".into();
    sweep.params.sweep_task = Some("accel".into());
    let a = run(&plain, &opts(dir.path(), "plain")).unwrap();
    let b = run(&sweep, &opts(dir.path(), "sweep")).unwrap();
    assert_eq!(fs::read_to_string(&a.csv_path).unwrap(), fs::read_to_string(&b.csv_path).unwrap());
}
