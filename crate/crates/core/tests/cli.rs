//! End-to-end checks of the `krylov-rp` binary.

use std::path::Path;
use std::process::{Command, Output};

fn krylov_rp(args: &[&str], workers: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_krylov-rp"))
        .args(args)
        .env("KRP_WORKERS", workers)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn profile_run(out: &Path, workers: &str) -> Output {
    let out = out.to_str().unwrap();
    krylov_rp(
        &["profile", "--gamma", "0:1:0.5", "--sizes", "32,48", "--reals", "4", "--seed", "7", "--out", out],
        workers,
    )
}

#[test]
fn aggregate_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let (one, two) = (dir.path().join("one"), dir.path().join("two"));
    let a = profile_run(&one, "1");
    let b = profile_run(&two, "2");
    assert!(a.status.success(), "{}", stderr(&a));
    assert!(b.status.success(), "{}", stderr(&b));
    let read = |p: &Path| std::fs::read(p.join("aggregate.csv")).unwrap();
    assert_eq!(read(&one), read(&two));
    let cells = |p: &Path| std::fs::read_dir(p.join("cells")).unwrap().count();
    assert_eq!(cells(&one), 12);
    assert_eq!(cells(&one), cells(&two));
}

#[test]
fn rerun_reuses_cached_cells() {
    let dir = tempfile::tempdir().unwrap();
    let first = profile_run(dir.path(), "2");
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).contains("6 cells computed, 0 cached"), "{}", stdout(&first));
    let second = profile_run(dir.path(), "2");
    assert!(second.status.success(), "{}", stderr(&second));
    assert!(stdout(&second).contains("0 cells computed, 6 cached"), "{}", stdout(&second));

    // a damaged cell is recomputed on the next run
    let victim = dir.path().join("cells").join(first_cell_csv(dir.path()));
    std::fs::write(&victim, "garbage\n").unwrap();
    let third = profile_run(dir.path(), "2");
    assert!(stdout(&third).contains("1 cells computed, 5 cached"), "{}", stdout(&third));
}

fn first_cell_csv(dir: &Path) -> String {
    let mut names: Vec<String> = std::fs::read_dir(dir.join("cells"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names.remove(0)
}

#[test]
fn verify_names_the_corrupted_file() {
    let dir = tempfile::tempdir().unwrap();
    assert!(profile_run(dir.path(), "1").status.success());
    let d = dir.path().to_str().unwrap();
    let ok = krylov_rp(&["verify", d], "1");
    assert!(ok.status.success(), "{}{}", stdout(&ok), stderr(&ok));
    assert!(stdout(&ok).contains("all checks passed"));

    let name = first_cell_csv(dir.path());
    let victim = dir.path().join("cells").join(&name);
    let mut bytes = std::fs::read(&victim).unwrap();
    bytes.extend_from_slice(b"0\n");
    std::fs::write(&victim, bytes).unwrap();
    let bad = krylov_rp(&["verify", d], "1");
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains(&name), "{}", stderr(&bad));
}

#[test]
fn verify_checks_the_expected_manifest() {
    let dir = tempfile::tempdir().unwrap();
    assert!(profile_run(dir.path(), "1").status.success());
    let d = dir.path().to_str().unwrap();
    let echo = dir.path().join("manifest.json");
    let same = krylov_rp(&["verify", d, "--manifest", echo.to_str().unwrap()], "1");
    assert!(same.status.success(), "{}", stderr(&same));

    let mut value: serde_json::Value = serde_json::from_slice(&std::fs::read(&echo).unwrap()).unwrap();
    value["manifest"]["seed"] = serde_json::json!(8);
    let other = dir.path().join("other.json");
    std::fs::write(&other, serde_json::to_vec(&value).unwrap()).unwrap();
    let differs = krylov_rp(&["verify", d, "--manifest", other.to_str().unwrap()], "1");
    assert_eq!(differs.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let empty = krylov_rp(&["profile", "--gamma", "", "--sizes", "32", "--out", out], "1");
    assert_eq!(empty.status.code(), Some(2));
    let missing = krylov_rp(&["rstat", "--gamma", "1", "--out", out], "1");
    assert_eq!(missing.status.code(), Some(2));
    let small = krylov_rp(&["profile", "--gamma", "1", "--sizes", "4", "--out", out], "1");
    assert_eq!(small.status.code(), Some(2));
    let huge = krylov_rp(&["profile", "--gamma", "1", "--sizes", "100000", "--out", out], "1");
    assert_eq!(huge.status.code(), Some(2));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn variance_flow_alias_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = krylov_rp(&["sm5", "--gamma", "1", "--sizes", "32", "--reals", "3", "--out", out], "1");
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("variance-flow:"), "{}", stdout(&o));
    let echo: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(echo["manifest"]["normalization"], "heteroskedastic");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("run");
    std::fs::write(
        &cfg,
        serde_json::to_vec(&serde_json::json!({
            "gamma_grid": [0.5, 2.0],
            "n_grid": [32],
            "realizations": 9,
            "seed": 3,
            "output_dir": out,
        }))
        .unwrap(),
    )
    .unwrap();
    let o = krylov_rp(&["rstat", "--config", cfg.to_str().unwrap(), "--reals", "2"], "1");
    assert!(o.status.success(), "{}", stderr(&o));
    let echo: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(echo["manifest"]["realizations"], 2);
    assert_eq!(echo["manifest"]["seed"], 3);
    assert_eq!(echo["manifest"]["gamma_grid"], serde_json::json!([0.5, 2.0]));

    std::fs::write(&cfg, br#"{"gamma_grid": [1], "n_grid": [32], "bogus": 1}"#).unwrap();
    let bad = krylov_rp(&["rstat", "--config", cfg.to_str().unwrap()], "1");
    assert_eq!(bad.status.code(), Some(2));
}
