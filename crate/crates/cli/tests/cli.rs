use std::fs;
use std::process::Command;

fn podrom() -> Command {
    Command::new(env!("CARGO_BIN_EXE_podrom"))
}

const TINY: &str = "[mesh]\nkind = offset_annulus\nrefinement = 1\n[fom]\ndt = 0.01\nt_snapshot_start = 0.5\nt_end = 0.6\n";

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "[fom]\nnu = fast\n").unwrap();
    let out = podrom().args(["fom", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nu"));
    let out = podrom().args(["fom", "--config", "/nonexistent.cfg"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stages_run_and_report_their_directories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    fs::write(&cfg, TINY).unwrap();
    let out_dir = dir.path().join("out");
    let out = podrom()
        .args(["--threads", "2", "--seed", "5", "rom", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let printed = String::from_utf8(out.stdout).unwrap();
    assert!(printed.trim().starts_with(out_dir.join("rom").to_str().unwrap()));
    assert!(out_dir.join("fom/stage.txt").exists());
    let out = podrom().args(["study", "NOPE", "--config"]).arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
