use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn patchdyn(args: &[&str]) -> Output {
    patchdyn_env(args, &[])
}

fn patchdyn_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_patchdyn"));
    cmd.args(args).env_remove("PATCHDYN_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_writes_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let o = patchdyn(&[
        "analyze",
        "--model",
        path(&data("g1.json")),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("analysis.json")).unwrap()).unwrap();
    let d = v["derivative_at_zero"].as_f64().unwrap();
    let x = v["x_t_infinity"].as_f64().unwrap();
    assert!((d - 1.06).abs() <= 0.005, "{d}");
    assert!((x - 9.21).abs() <= 0.01, "{x}");
    assert_eq!(v["verdict"]["numerical_relation"], "less");
}

#[test]
fn malformed_json_is_an_input_error() {
    let o = patchdyn(&["analyze", "--model", path(&data("malformed.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("malformed.json:3:"), "{}", stderr(&o));
}

#[test]
fn missing_file_is_an_input_error() {
    let o = patchdyn(&["scan", "--model", "/nonexistent/model.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reducible_model_is_a_validation_error() {
    let o = patchdyn(&["analyze", "--model", path(&data("reducible.json"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("[3]"), "{}", stderr(&o));
}

#[test]
fn scan_gap_column_changes_sign_three_times() {
    let dir = tempfile::tempdir().unwrap();
    let o = patchdyn(&[
        "scan",
        "--model",
        path(&data("g1.json")),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rd = csv::Reader::from_path(dir.path().join("scan.csv")).unwrap();
    assert_eq!(rd.headers().unwrap(), vec!["beta", "X_T", "gap"]);
    let gaps: Vec<f64> = rd
        .records()
        .map(|r| r.unwrap()[2].parse().unwrap())
        .collect();
    assert_eq!(gaps.len(), 2000);
    let flips = gaps
        .windows(2)
        .filter(|w| w[0].signum() != w[1].signum())
        .count();
    assert_eq!(flips, 3);
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("scan.json")).unwrap()).unwrap();
    assert_eq!(v["crossings"].as_array().unwrap().len(), 3);
    assert_eq!(v["level"].as_f64(), Some(10.0));
    assert!(v["verdicts"].is_object());
}

#[test]
fn classify_reports_region_and_beta0() {
    let o = patchdyn(&["classify", "--model", path(&data("two_patch_j1.json"))]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("J1"), "{out}");
    // β0 = (2 − 1) / (5/2 − 1/1) / (1 + 2) = 2/9.
    assert!(out.contains("2.2222222222222"), "{out}");
}

#[test]
fn two_block_validates_and_reduces() {
    let dir = tempfile::tempdir().unwrap();
    let o = patchdyn(&[
        "two-block",
        "--model",
        path(&data("five_patch_blocks.json")),
        "--block-i",
        "1,2,3,4",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("two_block.json")).unwrap()).unwrap();
    for lift in v["lifts"].as_array().unwrap() {
        assert!(lift["residual"].as_f64().unwrap() <= 1e-9);
    }
    let bad = patchdyn(&[
        "two-block",
        "--model",
        path(&data("five_patch_blocks.json")),
        "--block-i",
        "1,5",
    ]);
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn sis_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = patchdyn(&[
        "sis",
        "--model",
        path(&data("sis.json")),
        "--epsilon-max",
        "1e4",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("sis.csv").exists());

    let o = patchdyn(&[
        "sis-map",
        "--model",
        path(&data("g1.json")),
        "--total-n",
        "auto",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let spec: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("sis_model.json")).unwrap()).unwrap();
    assert!(spec["gamma_rates"]
        .as_array()
        .unwrap()
        .iter()
        .all(|g| g.as_f64().unwrap() > 0.0));

    let o = patchdyn(&[
        "sis-map",
        "--model",
        path(&data("g1.json")),
        "--total-n",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("must exceed"), "{}", stderr(&o));
}

#[test]
fn table3_prints_every_row() {
    let o = patchdyn(&["table3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for label in ["G1", "G2", "G3", "G4", "G5", "G3-alt"] {
        assert!(out.lines().any(|l| l.starts_with(label)), "{out}");
    }
    let g5 = out.lines().find(|l| l.starts_with("G5")).unwrap();
    assert!(g5.contains("PASS") && g5.contains(">,<,>,<"), "{g5}");
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = patchdyn(&[
            "scan",
            "--model",
            path(&data("g1.json")),
            "--points",
            "300",
            "--out",
            path(dir.path()),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(
        std::fs::read(a.path().join("scan.csv")).unwrap(),
        std::fs::read(b.path().join("scan.csv")).unwrap()
    );

    let args = |dir: &Path| {
        vec![
            "conjecture-probe".to_string(),
            "--samples".into(),
            "24".into(),
            "--seed".into(),
            "9".into(),
            "--points".into(),
            "10".into(),
            "--out".into(),
            dir.to_str().unwrap().into(),
        ]
    };
    let run = |dir: &Path, threads: &str| {
        let owned = args(dir);
        let refs: Vec<&str> = owned.iter().map(String::as_str).collect();
        let o = patchdyn_env(&refs, &[("PATCHDYN_THREADS", threads)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(dir.join("conjecture.json")).unwrap()
    };
    assert_eq!(run(a.path(), "1"), run(b.path(), "4"));
}

#[test]
fn bad_thread_count_is_an_input_error() {
    let o = patchdyn_env(
        &["table3", "--points", "20"],
        &[("PATCHDYN_THREADS", "zero")],
    );
    assert_eq!(o.status.code(), Some(2));
}
