//! End-to-end runs of the `mscg` binary.

use std::fs;
use std::process::Command;

fn mscg() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mscg"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn base_writes_reports_and_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = mscg()
        .args(["base", "--grid", "32x24", "--seed", "4", "-o"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("recursive-ms"));
    for f in [
        "base.csv",
        "base_base_solve.json",
        "base_hierarchy.json",
        "base_pressure.bin",
        "base_pressure.csv",
        "base_log_permeability.bin",
    ] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let bin = fs::read(dir.path().join("base_pressure.bin")).unwrap();
    assert_eq!(&bin[..8], b"MSCGFLD\0");
    assert_eq!(u32::from_le_bytes(bin[8..12].try_into().unwrap()), 32);
    assert_eq!(u32::from_le_bytes(bin[12..16].try_into().unwrap()), 24);
    assert_eq!(bin.len(), 16 + 8 * 32 * 24);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("base_base_solve.json")).unwrap())
            .unwrap();
    assert_eq!(report["converged"], true);
    assert!(report["levels"].as_array().unwrap().len() >= 2);
    assert!(!report["events"].as_array().unwrap().is_empty());
    let h: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("base_hierarchy.json")).unwrap())
            .unwrap();
    assert_eq!(h["levels"][0]["nx"], 32);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "nx = 40\nny = 40\nvariance = 1.0\npreconditioner = \"tatebe\"\n",
    )
    .unwrap();
    let out = mscg()
        .arg("--config")
        .arg(&cfg)
        .args(["show-config", "--variance", "0.25"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("nx = 40"));
    assert!(text.contains("variance = 0.25"));
    assert!(text.contains("preconditioner = \"tatebe\""));
}

#[test]
fn compare_and_channel_run_small() {
    let dir = tempfile::tempdir().unwrap();
    let out = mscg()
        .args(["compare", "--grid", "32", "-o"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    for m in ["recursive-ms", "tatebe", "polynomial", "standard-multigrid"] {
        assert!(csv.contains(m), "missing {m}");
    }
    let out = mscg()
        .args(["channel", "--grid", "64x16", "-o"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(fs::read_to_string(dir.path().join("channel.csv"))
        .unwrap()
        .contains("semi-coarsening"));
}

#[test]
fn bad_input_fails_cleanly() {
    assert!(!mscg()
        .args(["base", "--grid", "abc"])
        .output()
        .unwrap()
        .status
        .success());
    assert!(!mscg()
        .args(["base", "--f", "2"])
        .output()
        .unwrap()
        .status
        .success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let out = mscg().arg("-c").arg(&cfg).arg("base").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));
}
