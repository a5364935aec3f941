use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn tblab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tblab"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("spawn tblab")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SEGMENT: &str = r#"{"scenario": "seg", "measure": {"kind": "segment", "a": [0, 0], "b": [1, 0.2], "n": 40}, "trials": 3, "n_max": 8}"#;

#[test]
fn gen_writes_a_measure_that_parses_back() {
    let dir = TempDir::new().unwrap();
    let out = tblab(dir.path(), &["gen", "--generator", r#"{"kind": "cantor_corner", "level": 2}"#, "--name", "c2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("measures/c2.json")).unwrap();
    let mu = tblab::io::parse_measure(&text).unwrap();
    assert_eq!(mu.len(), 16);
    let v = json(&dir.path().join("measures/c2.json"));
    assert_eq!(v["meta"]["generator"]["kind"], "cantor_corner");
}

#[test]
fn gen_requires_a_source() {
    let dir = TempDir::new().unwrap();
    let out = tblab(dir.path(), &["gen"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--generator"));
}

#[test]
fn corrupted_measure_reports_line() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"atoms\": [\n    {\"z\": [0, 0], \"w\": }\n  ]\n}").unwrap();
    let out = tblab(dir.path(), &["curvature", "--measure", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("bad.json"), "{err}");
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#"{"scenario": "x", "measure": {"kind": "cantor_corner", "level": 2}, "colour": 3}"#);
    let out = tblab(dir.path(), &["pipeline", "t1", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn lattice_lists_charged_squares() {
    let dir = TempDir::new().unwrap();
    tblab(dir.path(), &["gen", "--generator", r#"{"kind": "cantor_corner", "level": 1}"#, "--normalize", "--name", "m"]);
    let m = dir.path().join("measures/m.json");
    let out = tblab(dir.path(), &["lattice", "--seed", "3", "--level", "4", "--measure", m.to_str().unwrap(), "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("tables/lattice.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    let mass: f64 = rows.iter().map(|r| r.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((mass - 1.0).abs() < 1e-12);

    let out = tblab(dir.path(), &["lattice", "--seed", "3", "--level", "1"]);
    assert!(out.status.success());
    let (l, squares) = tblab::io::parse_lattice(&fs::read_to_string(dir.path().join("reports/lattice.json")).unwrap()).unwrap();
    assert_eq!(l, tblab::geometry::sample_lattice(3));
    assert_eq!(squares.len(), 4);
}

#[test]
fn pipeline_reports_are_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let cfg = write_config(dir.path(), SEGMENT);
        let out = tblab(dir.path(), &["pipeline", "t3", "--config", &cfg]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ra = fs::read(a.path().join("reports/seg_t3.json")).unwrap();
    let rb = fs::read(b.path().join("reports/seg_t3.json")).unwrap();
    assert_eq!(ra, rb);
    let v: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(v["pipeline"], "t3");
    assert!(v["stages"]["f"].as_f64().unwrap() > 0.0);
}

#[test]
fn pipeline_t1_and_t1a_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SEGMENT);
    for which in ["t1", "t1a"] {
        let out = tblab(dir.path(), &["pipeline", which, "--config", &cfg, "--format", "csv"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let table = fs::read_to_string(dir.path().join(format!("tables/seg_{which}.csv"))).unwrap();
        assert!(table.starts_with("key,value\n"));
        assert!(table.contains("\nnorm,"));
    }
}

#[test]
fn curvature_and_capacity_from_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SEGMENT);
    let out = tblab(dir.path(), &["curvature", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("reports/curvature.json"));
    assert!(v["curvature"]["c2"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["identity"]["pass"], true);

    let out = tblab(dir.path(), &["capacity", "--config", &cfg, "--points", "24", "--directions", "16"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("reports/capacity.json"));
    assert!(v["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn cotlar_and_vitushkin_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SEGMENT);
    let out = tblab(dir.path(), &["cotlar", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("reports/cotlar.json").exists());
    let out = tblab(dir.path(), &["vitushkin", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("reports/seg_vitushkin.json"));
    assert!((v["length"].as_f64().unwrap() - 1.04f64.sqrt()).abs() < 1e-9);
}

#[test]
fn badsquares_table() {
    let dir = TempDir::new().unwrap();
    let out = tblab(dir.path(), &["badsquares", "--m", "3", "--trials", "2000", "--seed", "5", "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("tables/badsquares.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 5 + 1);
}

#[test]
fn verify_quick_subset_writes_json_and_csv() {
    let dir = TempDir::new().unwrap();
    let out = tblab(dir.path(), &["verify", "--quick", "--criterion", "7", "--criterion", "8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("criterion  7 PASS"), "{stdout}");
    assert!(stdout.contains("criterion  8 PASS"), "{stdout}");
    let v = json(&dir.path().join("reports/suite.json"));
    assert_eq!(v["criteria"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("tables/suite.csv").exists());
}

#[test]
fn hard_assert_failure_exits_nonzero() {
    let dir = TempDir::new().unwrap();
    let body = SEGMENT.replace(r#""trials": 3"#, r#""trials": 3, "taus": [0.001, 10.0]"#);
    let cfg = write_config(dir.path(), &body);
    let out = tblab(dir.path(), &["pipeline", "t3", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("reports/seg_t3.json"));
    let checks = v["checks"].as_array().unwrap();
    let tau = checks.iter().find(|c| c["name"] == "tau_stability").unwrap();
    assert_eq!(tau["pass"], false);
}

#[test]
fn unknown_criterion_is_an_error() {
    let dir = TempDir::new().unwrap();
    let out = tblab(dir.path(), &["suite", "--criterion", "99"]);
    assert_eq!(out.status.code(), Some(1));
}
