use std::path::Path;
use std::process::{Command, Output};

fn elcc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elcc"))
        .args(args)
        .current_dir(dir)
        .env_remove("ELCC_CONFIG")
        .output()
        .unwrap()
}

fn fixture(dir: &Path, years: &str) {
    let out = elcc(dir, &["--out", "fx", "make-fixture", "--years", years, "--storage-units", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn make_fixture_writes_a_runnable_study() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "4");
    for name in ["system.toml", "weather.csv", "load.csv", "hurricanes.csv", "elcc.toml"] {
        assert!(dir.path().join("fx").join(name).is_file(), "{name} missing");
    }
    let config = std::fs::read_to_string(dir.path().join("fx/elcc.toml")).unwrap();
    assert!(config.contains("system = \"system.toml\""));
    assert!(config.contains("output = \"results\""));
}

#[test]
fn scenario_length_follows_the_month() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "4");
    for (month, hours) in [("6", 720), ("12", 744)] {
        let out_dir = format!("m{month}");
        let out = elcc(
            dir.path(),
            &["--config", "fx/elcc.toml", "--month", month, "--samples", "2", "--out", &out_dir, "sample"],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = std::fs::read_to_string(dir.path().join(&out_dir).join("scenarios.csv")).unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).filter(|l| l.starts_with("0,")).collect();
        assert_eq!(rows.len(), hours, "month {month}");
    }
}

#[test]
fn missing_system_file_is_an_ingest_error() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "4");
    std::fs::remove_file(dir.path().join("fx/system.toml")).unwrap();
    let out = elcc(dir.path(), &["--config", "fx/elcc.toml", "--samples", "1", "uc-run"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn short_archive_cannot_be_fitted() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "2");
    let out = elcc(dir.path(), &["--config", "fx/elcc.toml", "fit-trends"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 3 years"));
}

#[test]
fn export_mode_rejects_searches() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "4");
    for cmd in ["accredit", "lole"] {
        let out = elcc(dir.path(), &["--config", "fx/elcc.toml", "--solver", "export", cmd]);
        assert_eq!(out.status.code(), Some(2), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn export_lp_writes_the_first_window() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "4");
    let out = elcc(
        dir.path(),
        &["--config", "fx/elcc.toml", "--samples", "1", "--out", "lp", "export-lp", "--la", "5"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lp = std::fs::read_to_string(dir.path().join("lp/uc_scenario0_window1.lp")).unwrap();
    assert!(lp.starts_with("\\") || lp.to_lowercase().contains("minimize"));
    assert!(lp.to_lowercase().contains("binar"));
}

#[test]
fn zero_threads_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = elcc(dir.path(), &["--threads", "0", "--out", "fx", "make-fixture"]);
    assert_eq!(out.status.code(), Some(2));
}
