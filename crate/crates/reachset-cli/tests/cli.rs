//! End-to-end checks of the `reachset` binary: exit codes, file formats,
//! determinism across re-runs and worker counts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin(dir: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_reachset"));
    cmd.current_dir(dir).env_remove("REACHSET_THREADS");
    cmd
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

/// Data rows of a CSV output (comments and header stripped).
fn data_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# reachset "), "missing version comment");
    assert!(text.contains("# config_hash: "), "missing config hash");
    assert!(text.contains("# seed: "), "missing seed");
    assert!(!text.contains('\r'), "line endings must be bare newlines");
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const BOUNDARY_CFG: &str = r#"{
  "mode": "2d-nodir", "t_f": 1.0, "n_arc": 33,
  "oracle": { "n_samples": 2000, "n_pieces": 20, "seed": 5 }
}"#;

#[test]
fn boundary_writes_closed_profile() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "cfg.json", BOUNDARY_CFG);
    run_ok(bin(dir.path()).args(["boundary", "--config", "cfg.json", "--out", "b.csv"]));

    let rows = data_rows(&dir.path().join("b.csv"));
    assert!(rows.len() >= 33, "got {} rows", rows.len());
    let pts: Vec<[f64; 2]> = rows
        .iter()
        .map(|r| [r[0].parse().unwrap(), r[1].parse().unwrap()])
        .collect();
    for i in 0..pts.len() {
        let q = pts[(i + 1) % pts.len()];
        let gap = ((pts[i][0] - q[0]).powi(2) + (pts[i][1] - q[1]).powi(2)).sqrt();
        assert!(gap < 0.4, "ordering gap {gap} at row {i}");
    }
    for r in &rows {
        assert!(["S", "C", "CS", "CC", "CSC", "CCC"].contains(&r[2].as_str()));
        assert!(r[3] == "true" || r[3] == "false");
    }

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("b.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["seed"], 5);
    assert_eq!(meta["config"]["mode"], "2d-nodir");
    assert!(meta["config_hash"].as_str().unwrap().len() == 64);
    assert!(meta["counts"]["kept"].as_u64().unwrap() as usize >= rows.len());
}

#[test]
fn boundary_same_config_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "cfg.json", BOUNDARY_CFG);
    run_ok(bin(dir.path()).args(["boundary", "--config", "cfg.json", "--out", "a.csv"]));
    run_ok(bin(dir.path()).args(["boundary", "--config", "cfg.json", "--out", "b.csv"]));
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn boundary_rerun_from_sidecar_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "cfg.json", BOUNDARY_CFG);
    run_ok(bin(dir.path()).args(["boundary", "--config", "cfg.json", "--out", "b.csv"]));

    let rerun = TempDir::new().unwrap();
    fs::copy(
        dir.path().join("b.meta.json"),
        rerun.path().join("b.meta.json"),
    )
    .unwrap();
    run_ok(bin(rerun.path()).args(["boundary", "--config", "b.meta.json"]));
    assert_eq!(
        fs::read(dir.path().join("b.csv")).unwrap(),
        fs::read(rerun.path().join("b.csv")).unwrap()
    );
    assert_eq!(
        fs::read(dir.path().join("b.meta.json")).unwrap(),
        fs::read(rerun.path().join("b.meta.json")).unwrap()
    );
}

#[test]
fn worker_count_does_not_change_bytes() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "cfg.json", BOUNDARY_CFG);
    run_ok(
        bin(dir.path())
            .env("REACHSET_THREADS", "1")
            .args(["boundary", "--config", "cfg.json", "--out", "t1.csv"]),
    );
    run_ok(
        bin(dir.path())
            .env("REACHSET_THREADS", "8")
            .args(["boundary", "--config", "cfg.json", "--out", "t8.csv"]),
    );
    assert_eq!(
        fs::read(dir.path().join("t1.csv")).unwrap(),
        fs::read(dir.path().join("t8.csv")).unwrap()
    );
}

#[test]
fn zero_arrival_time_exits_2() {
    let dir = TempDir::new().unwrap();
    let code = exit_code(bin(dir.path()).args(["boundary", "--mode", "2d-nodir", "--t-f", "0"]));
    assert_eq!(code, 2);
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "cfg.json",
        r#"{"mode":"2d-nodir","t_f":1.0,"bogus":true}"#,
    );
    let code = exit_code(bin(dir.path()).args(["boundary", "--config", "cfg.json"]));
    assert_eq!(code, 2);
}

#[test]
fn oracle_rows_match_samples_and_seed_changes_bytes() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "cfg.json",
        r#"{"mode":"2d-nodir","t_f":1.0,"oracle":{"n_samples":10,"n_pieces":20,"seed":7}}"#,
    );
    run_ok(bin(dir.path()).args(["oracle", "--config", "cfg.json", "--out", "o7.csv"]));
    let rows = data_rows(&dir.path().join("o7.csv"));
    assert_eq!(rows.len(), 10);
    for r in &rows {
        let (x, y): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert!((x * x + y * y).sqrt() <= 1.0 + 1e-12);
    }

    run_ok(bin(dir.path()).args([
        "oracle", "--config", "cfg.json", "--seed", "8", "--out", "o8.csv",
    ]));
    let o7 = fs::read_to_string(dir.path().join("o7.csv")).unwrap();
    let o8 = fs::read_to_string(dir.path().join("o8.csv")).unwrap();
    assert_ne!(o7, o8);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o8.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["config"]["oracle"]["seed"], 8);
}

#[test]
fn spatial_oracle_rows_carry_direction() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "cfg.json",
        r#"{"mode":"3d-nodir","t_f":1.0,"oracle":{"n_samples":5,"n_pieces":10,"seed":1}}"#,
    );
    run_ok(bin(dir.path()).args(["oracle", "--config", "cfg.json", "--out", "o.csv"]));
    let rows = data_rows(&dir.path().join("o.csv"));
    assert_eq!(rows.len(), 5);
    for r in &rows {
        assert_eq!(r.len(), 6);
        let e: Vec<f64> = r[3..6].iter().map(|v| v.parse().unwrap()).collect();
        let n = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
        assert!((n - 1.0).abs() < 1e-9, "direction norm {n}");
    }
}

const S_PATH: &str = r#"{
  "start": { "x": 0.0, "y": 0.0, "theta": 0.0 },
  "segments": [ { "kind": "S", "length": 2.0 } ],
  "kappa_max": 1.0
}"#;

#[test]
fn pmp_check_straight_path_all_pass() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "path.json", S_PATH);
    write(
        dir.path(),
        "cfg.json",
        r#"{"mode":"2d-nodir","t_f":2.0,"path_file":"path.json"}"#,
    );
    run_ok(bin(dir.path()).args(["pmp-check", "--config", "cfg.json", "--out", "r.json"]));

    let text = fs::read_to_string(dir.path().join("r.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["report"]["pointwise_pass"], true);
    assert_eq!(doc["report"]["constancy_pass"], true);
    assert_eq!(doc["report"]["transversality_pass"], true);
    // The report survives a parse/serialize cycle with no value drift.
    let again = serde_json::to_string_pretty(&doc).unwrap();
    let doc2: serde_json::Value = serde_json::from_str(&again).unwrap();
    assert_eq!(doc, doc2);
}

#[test]
fn pmp_check_malformed_path_exits_2() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "path.json", "{\"start\":");
    write(
        dir.path(),
        "cfg.json",
        r#"{"mode":"2d-nodir","t_f":2.0,"path_file":"path.json"}"#,
    );
    let code = exit_code(bin(dir.path()).args(["pmp-check", "--config", "cfg.json"]));
    assert_eq!(code, 2);

    write(
        dir.path(),
        "cfg2.json",
        r#"{"mode":"2d-nodir","t_f":2.0,"path_file":"missing.json"}"#,
    );
    assert_eq!(
        exit_code(bin(dir.path()).args(["pmp-check", "--config", "cfg2.json"])),
        2
    );
}

#[test]
fn equiv_small_sweep_passes_and_rejects_empty() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "cfg.json",
        r#"{"mode":"2d-dir","t_f":1.0,"n_arc":17,"n_directions":16}"#,
    );
    run_ok(bin(dir.path()).args(["equiv", "--config", "cfg.json", "--out", "e.csv"]));
    let rows = data_rows(&dir.path().join("e.csv"));
    assert_eq!(rows.len(), 16);
    for r in &rows {
        assert_eq!(r.last().unwrap(), "true");
    }

    write(
        dir.path(),
        "cfg0.json",
        r#"{"mode":"2d-dir","t_f":1.0,"n_directions":0}"#,
    );
    assert_eq!(
        exit_code(bin(dir.path()).args(["equiv", "--config", "cfg0.json"])),
        2
    );
}

#[test]
fn flag_overrides_reach_the_sidecar() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "cfg.json",
        r#"{"mode":"2d-nodir","t_f":1.0,"oracle":{"n_samples":5,"n_pieces":5,"seed":1}}"#,
    );
    run_ok(bin(dir.path()).args([
        "oracle", "--config", "cfg.json", "--t-f", "2.0", "--mode", "3d-nodir", "--out", "o.csv",
    ]));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["config"]["t_f"], 2.0);
    assert_eq!(meta["config"]["mode"], "3d-nodir");
    assert_eq!(meta["config"]["out"], "o.csv");
}

#[test]
fn version_prints_and_exits_0() {
    let dir = TempDir::new().unwrap();
    let out = run_ok(bin(dir.path()).arg("version"));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("reachset "));
}
