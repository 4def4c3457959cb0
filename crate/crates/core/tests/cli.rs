use std::path::Path;
use std::process::{Command, Output};

fn sle_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sle-lab"))
        .args(args)
        .env_remove("SLE_LAB_THREADS")
        .output()
        .expect("run sle-lab")
}

fn manifest(out: &Path) -> serde_json::Value {
    let mut p = out.as_os_str().to_owned();
    p.push(".manifest.json");
    serde_json::from_slice(&std::fs::read(p).expect("manifest written")).unwrap()
}

#[test]
fn empty_argv_prints_help() {
    let o = sle_lab(&[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("Usage"));
}

#[test]
fn negative_kappa_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = sle_lab(&["trace", "--kappa", "-1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn trace_rerun_is_byte_identical_and_manifest_checksums_match() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = sle_lab(&["trace", "--kappa", "8", "--steps", "2000", "--seed", "42", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let m = manifest(&a);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config"]["seed"], 42);
    assert_eq!(m["config"]["job"]["steps"], 2000);
    assert_eq!(m["artifacts"][0]["sha256"], sle_lab::io::sha256_hex(&bytes));
}

#[test]
fn experiment_report_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("run{threads}"));
        let o = sle_lab(&[
            "experiment",
            "--experiment",
            "bessel-continuity",
            "--samples",
            "40",
            "--dt",
            "1e-3",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        reports.push(std::fs::read(out.join("bessel-continuity.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn hcap_slit_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.json");
    let o = sle_lab(&["hcap", "--fixture", "slit", "--samples", "20000", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let (h, se) = (v["hcap"].as_f64().unwrap(), v["stderr"].as_f64().unwrap());
    assert!((h - 0.5).abs() <= 3.0 * se, "{h} ± {se}");
}

#[test]
fn failed_check_exits_1_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bub");
    let o = sle_lab(&[
        "experiment",
        "--experiment",
        "bubble-disconnection",
        "--samples",
        "4",
        "--dt",
        "1e-3",
        "--param",
        "threshold_p=1.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(manifest(&out)["status"], "failed");
    assert!(out.join("bubble-disconnection.json").exists());
}

#[test]
fn unwritable_output_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let out = blocker.join("sub").join("t.csv");
    let o = sle_lab(&["drive", "--kappa", "2", "--steps", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn config_file_with_unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, br#"{"name": "modulus", "samples": 2, "bogus": 1}"#).unwrap();
    let o = sle_lab(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn drive_csv_has_metadata_header_and_force_point_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let o = sle_lab(&["drive", "--kappa", "6", "--rho", "2", "--at", "1", "--dt", "1e-4", "--T", "0.01", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# {"));
    assert_eq!(lines.next().unwrap(), "t,W,V_1");
    assert_eq!(lines.count(), 101);
}
