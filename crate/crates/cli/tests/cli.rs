use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use conlearn_mio::{read_lp_file, solve_mip, MipOptions};

fn tiny_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/tiny_wfp.toml")
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conlearn"))
        .arg("--config")
        .arg(tiny_config())
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("solve_report.json")).unwrap()).unwrap()
}

#[test]
fn solve_on_the_tiny_instance_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["optimal"], true);
    assert!(r["residuals"]["flow_balance"].as_f64().unwrap() <= 1e-7);
    assert!(String::from_utf8_lossy(&o.stdout).contains("objective"));
}

#[test]
fn exported_lp_file_reproduces_the_solved_objective() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["solve"]).status.success());
    let solved = report(dir.path())["objective"].as_f64().unwrap();
    let lp = dir.path().join("tiny.lp");
    let o = run(dir.path(), &["export", "--lp", lp.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let model = read_lp_file(&lp).unwrap();
    let sol = solve_mip(&model, &MipOptions::default()).unwrap();
    assert!((sol.objective - solved).abs() <= 1e-6 * solved.abs().max(1.0), "{} vs {solved}", sol.objective);
}

#[test]
fn every_solve_mode_agrees_where_it_applies() {
    let dir = tempfile::tempdir().unwrap();
    let objective = |args: &[&str]| {
        let o = run(dir.path(), args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        report(dir.path())["objective"].as_f64().unwrap()
    };
    let mono = objective(&["solve"]);
    let cs = objective(&["solve", "--mode", "column-selection"]);
    assert!((mono - cs).abs() <= 1e-6 * mono.abs());
    let tree = objective(&["solve", "--class", "cart"]);
    let leaves = objective(&["solve", "--class", "cart", "--mode", "leaves"]);
    assert!((tree - leaves).abs() <= 1e-6 * tree.abs());
}

#[test]
fn trained_document_can_be_embedded() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["train"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = dir.path().join("palatability_model.json");
    assert!(doc.is_file());
    assert!(dir.path().join("palatability_cv.json").is_file());
    let o = run(dir.path(), &["solve", "--model", doc.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn command_line_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["solve"]).status.success());
    let base = report(dir.path())["objective"].as_f64().unwrap();
    assert!(run(dir.path(), &["solve", "--cost-seed", "12"]).status.success());
    let other = report(dir.path())["objective"].as_f64().unwrap();
    assert_ne!(base, other);
}

#[test]
fn experiments_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = run(dir.path(), &["experiment", "cs-scaling", "--features", "4", "--rows", "2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let o = run(dir.path(), &["experiment", "leaf-depth", "--samples", "300"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["cs_scaling.csv", "leaf_depth.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert!(a.path().join("cs_scaling_timing.csv").is_file());
}

#[test]
fn unknown_command_fails_with_usage() {
    let o = Command::new(env!("CARGO_BIN_EXE_conlearn")).arg("frobnicate").output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn missing_config_file_is_an_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_conlearn"))
        .args(["--config", "/nonexistent/run.toml", "solve"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not exist"));
}
