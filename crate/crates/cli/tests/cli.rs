//! Exercises the `dal` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

fn dal(args: &[&str], root: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dal"));
    cmd.args(args);
    match root {
        Some(r) => cmd.env("DAL_OUTPUT_ROOT", r),
        None => cmd.env_remove("DAL_OUTPUT_ROOT"),
    };
    cmd.output().expect("spawn dal")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SMALL: &str = r#"{
  "dataset": {"n_train": 200, "n_test": 100},
  "noise": {"kind": "symmetric", "eta": 0.3},
  "loss": {"kind": "dal", "q_s": 0.6},
  "model": {"hidden": [8]},
  "optimizer": {"epochs": 4},
  "output_dir": "small"
}"#;

#[test]
fn verify_passes_and_reports_every_check() {
    let o = dal(&["verify", "--samples", "10", "--gradient-points", "50"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("check=theorem1.oracle_agreement"));
    assert!(out.contains("deviation=") && out.contains("tolerance="));
    assert!(out.trim_end().ends_with("failed=0"));
}

#[test]
fn injected_fault_fails_by_name() {
    let o = dal(
        &["verify", "--samples", "10", "--gradient-points", "20", "--inject-fault"],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("check=theorem1.spot_value"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("theorem1.spot_value"));
}

#[test]
fn curves_print_csv() {
    let o = dal(&["curves", "--losses", "ce,gce:1,tce:6", "--resolution", "10"], None);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("f_y,ce,gce:1,tce:6"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], 0.1);
    assert!((first[1] - 10.0).abs() < 1e-12);
    assert_eq!(first[2], 1.0);
    assert_eq!(out.lines().count(), 10);
}

#[test]
fn bad_inputs_exit_with_two() {
    assert_eq!(
        dal(&["curves", "--losses", "ce", "--resolution", "5"], None)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(dal(&["curves", "--losses", "gce:-1"], None).status.code(), Some(2));
    assert_eq!(
        dal(&["run", "--config", "/nonexistent/cfg.json"], None).status.code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"loss": {"kind": "gce", "q": -0.5}}"#).unwrap();
    assert_eq!(
        dal(&["run", "--config", bad.to_str().unwrap()], None).status.code(),
        Some(2)
    );
    assert_eq!(dal(&["verify", "--bogus"], None).status.code(), Some(2));
}

#[test]
fn run_writes_under_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, SMALL).unwrap();
    let root = dir.path().join("root");
    let o = dal(&["run", "--config", cfg.to_str().unwrap()], Some(&root));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(root.join("small/metrics.csv")).unwrap();
    assert!(csv.starts_with("epoch,q,lambda,lr,mean_train_loss,train_acc_clean,train_acc_noisy,test_acc\n"));
    assert_eq!(csv.lines().count(), 5);
    assert!(root.join("small/summary.json").exists());
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, SMALL).unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = dal(
        &["sweep", "--config", cfg, "--param", "q_s", "--values", "0.5,0.7"],
        Some(dir.path()),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("small/sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "value,final_test_acc,best_test_acc");
    assert!(rows[1].starts_with("0.5,") && rows[2].starts_with("0.7,"));
    assert!(dir.path().join("small/q_s=0.5/metrics.csv").exists());

    let o = dal(
        &["sweep", "--config", cfg, "--param", "momentum", "--values", "0.5"],
        Some(dir.path()),
    );
    assert_eq!(o.status.code(), Some(2));
    let o = dal(
        &["sweep", "--config", cfg, "--param", "q", "--values", "0.5"],
        Some(dir.path()),
    );
    assert_eq!(o.status.code(), Some(2));
}
