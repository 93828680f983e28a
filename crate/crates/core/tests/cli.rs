use std::fs;
use std::path::Path;
use std::process::Command;

fn roefield(args: &[&str], config: Option<&str>, dir: &Path) -> i32 {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_roefield"));
    cmd.args(args);
    if let Some(text) = config {
        let p = dir.join("config.toml");
        fs::write(&p, text).unwrap();
        cmd.arg("--config").arg(p);
    }
    let out = cmd.output().unwrap();
    out.status.code().expect("exited normally")
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn limit_is_byte_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(roefield(&["limit", "--threads", "0", "--out", a.to_str().unwrap()], None, tmp.path()), 0);
    assert_eq!(roefield(&["limit", "--threads", "3", "--seed", "9", "--out", b.to_str().unwrap()], None, tmp.path()), 0);
    let (fa, fb) = (read_dir(&a), read_dir(&b));
    assert_eq!(fa, fb);
    let csv = String::from_utf8(fs::read(a.join("profile.csv")).unwrap()).unwrap();
    assert!(csv.starts_with("t,value,certificate,gap\n"));
    assert!(!csv.contains('\r'));
    assert_eq!(csv.lines().count(), 8);
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    assert_eq!(roefield(&["limit", "--out", o], Some("t_grid = []"), tmp.path()), 2);
    let record: serde_json::Value = serde_json::from_slice(&fs::read(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(record["exit_code"], 2);
    assert_eq!(record["command"], "limit");
    assert_eq!(roefield(&["coeffs"], Some("order = [1, 2"), tmp.path()), 2);
    assert_eq!(roefield(&["coeffs"], Some("unknown_key = 3"), tmp.path()), 2);
    assert_eq!(roefield(&["coeffs", "--config", "/nonexistent/roefield.toml"], None, tmp.path()), 2);
    assert_eq!(roefield(&["frobnicate"], None, tmp.path()), 2);
}

#[test]
fn verify_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(roefield(&["verify"], Some("random_matrices = 4"), tmp.path()), 0);
    assert_eq!(roefield(&["verify"], Some("random_matrices = 4\nrefinement = \"doubled\""), tmp.path()), 1);
    assert_eq!(roefield(&["verify"], Some("random_matrices = 4\ntolerance = 1e-16"), tmp.path()), 2);
}

#[test]
fn window_cap_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(roefield(&["beta"], Some("t = 0.0625\nwindow_cap = 150"), tmp.path()), 3);
}

#[test]
fn every_command_writes_its_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    for (cmd, csv) in [("coeffs", "coeffs.csv"), ("beta", "beta.csv"), ("scan", "continuity.csv"), ("field", "field.csv")] {
        assert_eq!(roefield(&[cmd, "--out", o], None, tmp.path()), 0, "{cmd}");
        assert!(out.join(csv).exists());
        let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join(format!("{cmd}.json"))).unwrap()).unwrap();
        assert_eq!(summary["status"], "pass");
    }
    let field = fs::read_to_string(out.join("field.csv")).unwrap();
    assert!(field.starts_with("element,t,value,certificate\n"));
}
