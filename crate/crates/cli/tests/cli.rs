//! Exit codes and failure reporting of the binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn blacksol(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blacksol"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run binary")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

// default grid: bump directions must vanish at the ends for the factorized forms
const GRID: &str = "[grid]\nhalf_width = 40.0\npoints = 4001\n";

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bogus = 1\n");
    let out = blacksol(&["verify-lemmas", "--config", &cfg], &dir.path().join("run"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn bad_grid_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = blacksol(&["spectrum", "--grid.N", "5"], &dir.path().join("run"));
    assert_eq!(out.status.code(), Some(2));
    let out = blacksol(&["spectrum", "--R", "-1"], &dir.path().join("run"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = blacksol(&["stability", "--frobnicate"], &dir.path().join("run"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupted_potential_fails_factorization() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{GRID}[verify]\ngroups = [\"factorization\"]\n[hooks]\nkplus_potential_offset = 1e-3\n");
    let cfg = write_config(dir.path(), &body);
    let out = blacksol(&["verify-lemmas", "--config", &cfg], &dir.path().join("run"));
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let failed = stderr.lines().find(|l| l.contains("failed checks")).unwrap_or_default();
    assert!(failed.contains("factorization/kplus_factorization"), "{stderr}");
    assert!(!failed.contains("kminus_factorization"), "{stderr}");

    let clean = write_config(dir.path(), &format!("{GRID}[verify]\ngroups = [\"factorization\"]\n"));
    let out = blacksol(&["verify-lemmas", "--config", &clean], &dir.path().join("clean"));
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn quiet_run_prints_nothing_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{GRID}[verify]\ngroups = [\"profile\", \"conserved\"]\n"));
    let run = dir.path().join("run");
    let out = blacksol(&["verify-lemmas", "--quiet", "--config", &cfg], &run);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["passed"], true);
    assert_eq!(manifest["command"], "verify-lemmas");
    assert!(run.join("verify.json").exists());
    assert!(run.join("config.resolved.toml").exists());
}

#[test]
fn verdicts_do_not_depend_on_seed() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[grid]\nhalf_width = 40.0\npoints = 1601\n[verify]\ngroups = [\"nonnegativity\"]\nsamples = 20\n";
    let cfg = write_config(dir.path(), body);
    for seed in ["1", "2"] {
        let out = blacksol(
            &["verify-lemmas", "--quiet", "--seed", seed, "--config", &cfg],
            &dir.path().join(seed),
        );
        assert_eq!(out.status.code(), Some(0), "seed {seed}");
    }
}
