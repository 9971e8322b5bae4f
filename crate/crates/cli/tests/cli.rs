use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn qlayers(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qlayers"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

const SMALL: [(&str, &str); 4] = [
    ("QLAYERS_DATASET_N_PAIRS", "24"),
    ("QLAYERS_DATASET_POINTS_PER_PAIR", "64"),
    ("QLAYERS_N_QUBITS", "2"),
    ("QLAYERS_BATCH_SIZE", "8"),
];

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_then_plots() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = qlayers(&["run", "--out", path(&out), "--seed", "3", "--max-epochs", "3", "--depth", "1"], &SMALL);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("checkpoint.json").exists());
    let cfg = std::fs::read_to_string(out.join("config.json")).unwrap();
    assert!(cfg.contains("\"seed\": 3"));
    assert!(cfg.contains("\"n_pairs\": 24"));

    let o = qlayers(&["plots", "--out", path(&out)], &[]);
    assert!(o.status.success());
    assert!(out.join("plots/pca_post_qnn.csv").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"feature_map": "z_reps_2", "max_epochs": 2, "patience": 2, "seed": 1}"#).unwrap();
    let out = tmp.path().join("run");
    let o = qlayers(&["run", "--config", path(&cfg), "--seed", "9", "--out", path(&out)], &SMALL);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("config.json")).unwrap();
    assert!(text.contains("\"z_reps_2\""));
    assert!(text.contains("\"seed\": 9"));
}

#[test]
fn divergence_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let mut env = SMALL.to_vec();
    env.extend([("QLAYERS_LEARNING_RATE", "1e305"), ("QLAYERS_MOMENTUM", "0")]);
    let o = qlayers(&["run", "--out", path(&out), "--max-epochs", "3"], &env);
    assert_eq!(o.status.code(), Some(2));
    assert!(out.join("metrics.json").exists());
}

#[test]
fn bad_input_is_rejected() {
    let o = qlayers(&["fmap-study", "--maps", "z_reps_1,nope", "--out", "/nonexistent/x"], &SMALL);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("pauli_xyz_1_rep"), "{err}");

    let o = qlayers(&["run", "--out", "/tmp/never"], &[("QLAYERS_BOGUS", "1")]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("QLAYERS_BOGUS"));

    let o = qlayers(&["plots", "--out", "/nonexistent/run"], &[]);
    assert!(!o.status.success());
}

#[test]
fn depth_study_summary() {
    let tmp = TempDir::new().unwrap();
    let o = qlayers(
        &["depth-study", "--out", path(tmp.path()), "--depths", "1,2", "--max-epochs", "2", "--workers", "2"],
        &SMALL,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(tmp.path().join("depth_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}
