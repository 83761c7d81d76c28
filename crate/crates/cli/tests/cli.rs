use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn weyllab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weyllab"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .env_remove("WEYLLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn passing_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = weyllab(dir.path(), &["bracketing", "--model", "interval:L=1", "--cuts", "0.5", "--lambdas", "50"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("bracketing.csv")).unwrap();
    assert_eq!(csv, "lambda,lower,N,upper\n5.0000000000000000e1,2,2,4\n");
    let s = summary(dir.path());
    assert_eq!(s["passed"], true);
    assert!(s["version"].as_str().unwrap().starts_with("weyllab "));
    assert_eq!(s["grids"]["lambda"][0], 50.0);
    assert!(s["checks"].as_array().unwrap().iter().all(|c| c["margin"].is_number()));
}

#[test]
fn failed_invariant_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = weyllab(dir.path(), &["weyl", "--model", "ars:m=1", "--lambdas", "200,400", "--tol", "1e-6"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAILED weyl_ratio@400"));
    let s = summary(dir.path());
    assert_eq!(s["passed"], false);
    assert!(dir.path().join("counting.csv").exists());
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_config = dir.path().join("bad.json");
    std::fs::write(&bad_config, r#"{"lambdas": [10], "no_such_key": 1}"#).unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["weyl", "--model", "nosuchmodel"],
        vec!["weyl", "--lambdas", "100,50"],
        vec!["weyl", "--lambdas", ""],
        vec!["hardy", "--model", "ars:m=1", "--eps", "0.4"],
        vec!["nosuchcommand"],
        vec!["--config", bad_config.to_str().unwrap(), "weyl"],
        vec!["concentrate", "--prefixes", "400,100"],
    ];
    for args in cases {
        let out = weyllab(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"model": "interval:L=pi", "lambdas": [10, 20], "seed": 5}"#).unwrap();
    let out = weyllab(dir.path(), &["--config", config.to_str().unwrap(), "weyl", "--lambdas", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("counting.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2);
    // eigenvalues 1, 4, 9 below 10
    assert!(rows[1].starts_with("1.0000000000000000e1,3,"), "{csv}");
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let args = ["weyl", "--model", "ars:m=1", "--lambdas", "200,800"];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let one = weyllab(a.path(), &[&["--threads", "1"][..], &args].concat());
    let many = Command::new(env!("CARGO_BIN_EXE_weyllab"))
        .arg("--out")
        .arg(b.path())
        .args(args)
        .env("WEYLLAB_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(one.status.code(), many.status.code());
    for f in ["counting.csv", "summary.json"] {
        let (x, y) = (std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        assert_eq!(x, y, "{f} differs");
    }
    let c = tempfile::tempdir().unwrap();
    let out = weyllab(c.path(), &["concentrate", "--count", "60", "--prefixes", "20,60", "--seed", "3"]);
    let d = tempfile::tempdir().unwrap();
    let again = weyllab(d.path(), &["--threads", "3", "concentrate", "--count", "60", "--prefixes", "20,60", "--seed", "3"]);
    assert_eq!(out.status.code(), again.status.code());
    assert_eq!(
        std::fs::read(c.path().join("concentration.csv")).unwrap(),
        std::fs::read(d.path().join("concentration.csv")).unwrap()
    );
}

#[test]
fn curvature_report_is_printed_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = weyllab(dir.path(), &["curvature", "--model", "worst:k=2", "--x", "0.1", "--points", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["sec_0i", "riemann_ijkl", "hess_delta"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    let sec = r["sec_0i"][0].as_f64().unwrap();
    assert!((sec / (-0.75e4) - 1.0).abs() < 1e-10);
}
