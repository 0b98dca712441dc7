use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use holobeam::experiment::{read_records, read_traces, Method};

fn holobeam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holobeam"))
        .args(args)
        .output()
        .unwrap()
}

fn write_spec(dir: &Path, body: &str) -> String {
    let path = dir.join("spec.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const SMALL: &str = r#"{"base": {"num_users": 2, "num_feeds": 3, "rhs_rows": 3, "rhs_cols": 3},
    "snr_db": 5, "sweep": {"kind": "snr", "snr_db": [0, 5]}, "num_trials": 2}"#;

#[test]
fn run_honours_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = holobeam(&[
        "run",
        &spec,
        "--trials",
        "3",
        "--seed",
        "99",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let records = read_records(&out.join("results.csv")).unwrap();
    assert_eq!(records.len(), 2 * 3 * 2);
    assert_eq!(
        records[0].channel_seed,
        holobeam::experiment::trial_seed(99, 0)
    );
    assert!(out.join("summary.json").exists());
    assert!(out.join("plot.svg").exists());
    assert!(!out.join("trace.csv").exists());
}

#[test]
fn convergence_subcommand_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{"base": {"num_users": 2, "num_feeds": 3, "rhs_rows": 3, "rhs_cols": 3},
            "sweep": {"kind": "snr", "snr_db": [0]}, "num_trials": 2,
            "methods": ["proposed"], "optimizer": {"max_iters": 12}}"#,
    );
    let out = dir.path().join("conv");
    let o = holobeam(&["convergence", &spec, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let traces = read_traces(&out.join("trace.csv")).unwrap();
    assert_eq!(traces.len(), 24);
    assert!(traces.iter().all(|t| t.method == Method::Proposed));
    for pair in traces.windows(2).filter(|p| p[0].trial == p[1].trial) {
        assert!(pair[1].sum_rate >= pair[0].sum_rate - 1e-9);
    }
}

#[test]
fn timing_subcommand_requires_timing_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), SMALL);
    let o = holobeam(&["timing", &spec]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("timing"), "{err}");

    let spec = write_spec(
        dir.path(),
        r#"{"base": {"num_users": 2, "num_feeds": 4}, "methods": ["proposed"],
            "sweep": {"kind": "timing", "m": [16, 32], "iterations": 3}, "num_trials": 2}"#,
    );
    let out = dir.path().join("timing");
    let o = holobeam(&["timing", &spec, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let records = read_records(&out.join("results.csv")).unwrap();
    assert!(records.iter().all(|r| r.ms_per_iteration.is_some()));
}

#[test]
fn invalid_spec_fails_with_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{"base": {"num_users": 3, "num_feeds": 2}, "sweep": {"kind": "convergence"}}"#,
    );
    let o = holobeam(&["run", &spec]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("num_feeds"), "{err}");
}

#[test]
fn missing_file_fails() {
    let o = holobeam(&["run", "/nonexistent/spec.json"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/spec.json"));
}
