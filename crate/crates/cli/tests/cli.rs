use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bchflow::io::report::ExperimentReport;

const SMALL: &str = "seed = 4
[grid]
n = 16
[stepper]
dt = 1e-5
t_final = 2e-4
adaptive = false
[forcing]
kind = modes
modes = 1:1:0,1
[output]
snapshot_stride = 5
checkpoint_stride = 10
";

fn bchflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bchflow"))
        .args(args)
        .env_remove("BCHFLOW_OUT_DIR")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("c.ini");
    std::fs::write(&p, text).unwrap();
    p
}

fn reports(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir.join("reports"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "report"))
        .collect();
    v.sort();
    v
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_csv_snapshots_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = bchflow(&["run", "--config", s(&cfg), "--out", s(&out), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("run.csv").exists());
    assert!(out.join("snap_00000000.chbk").exists());
    assert!(out.join("snap_00000020.chbk").exists());
    assert!(out.join("checkpoint.chbk.meta").exists());
    assert_eq!(reports(&out).len(), 1);
}

#[test]
fn out_dir_defaults_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_bchflow"))
        .args(["run", "--config", s(&cfg), "-q"])
        .env("BCHFLOW_OUT_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("run.csv").exists());
}

#[test]
fn misspelled_key_exits_2_with_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("[stepper]", "[model]\nviscoity.value = 2\n[stepper]"));
    let o = bchflow(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("viscosity.value"), "{err}");

    let o = bchflow(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("o")), "--strict", "false", "-q"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn assumption_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("[stepper]", "[model]\nfriction.value = 0\n[stepper]"));
    let o = bchflow(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn darcy_sweep_exit_code_follows_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("sweep");
    let o = bchflow(&["sweep", "darcy", "--config", s(&cfg), "--levels", "4", "--out", s(&out), "--threads", "2"]);
    let files = reports(&out);
    assert_eq!(files.len(), 1);
    let report = ExperimentReport::read(&files[0]).unwrap();
    assert_eq!(report.experiment, "darcy_limit");
    assert_eq!(report.series("levels").unwrap().rows.len(), 4);
    let expected = if report.passed() { 0 } else { 1 };
    assert_eq!(o.status.code(), Some(expected));
}

#[test]
fn darcy_sweep_with_three_levels_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = bchflow(&["sweep", "darcy", "--config", s(&cfg), "--levels", "3", "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_snapshot_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert_eq!(bchflow(&["run", "--config", s(&cfg), "--out", s(&out), "-q"]).status.code(), Some(0));
    let snap = out.join("snap_00000010.chbk");
    let o = bchflow(&["check", "--snapshot", s(&snap), "--config", s(&cfg), "--out", s(&dir.path().join("c1"))]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let o = bchflow(&["check", "--config", s(&cfg), "--out", s(&dir.path().join("c2")), "-q"]);
    assert_eq!(o.status.code(), Some(0));
    let o = bchflow(&["check", "--out", s(&dir.path().join("c3"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn resume_matches_the_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let full = dir.path().join("full");
    assert_eq!(bchflow(&["run", "--config", s(&cfg), "--out", s(&full), "-q"]).status.code(), Some(0));
    let resumed = dir.path().join("resumed");
    let ckpt = full.join("checkpoint.chbk");
    let o = bchflow(&["resume", s(&ckpt), "--config", s(&cfg), "--out", s(&resumed), "-q"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let a = std::fs::read_to_string(full.join("run.csv")).unwrap();
    let b = std::fs::read_to_string(resumed.join("run.csv")).unwrap();
    let tail: Vec<&str> = b.lines().skip(1).collect();
    let a_lines: Vec<&str> = a.lines().collect();
    assert_eq!(&a_lines[a_lines.len() - tail.len()..], &tail[..]);

    std::fs::remove_file(full.join("checkpoint.chbk.meta")).unwrap();
    let o = bchflow(&["resume", s(&ckpt), "--config", s(&cfg), "--out", s(&dir.path().join("r2")), "-q"]);
    assert_eq!(o.status.code(), Some(2));
}
