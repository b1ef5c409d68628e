use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const IOTA3: &str = r#"{"type":"irreducible","d":3,"base":{"type":"fuchsian"}}"#;
const BENT03: &str =
    r#"{"type":"bend","theta":{"re":0.0,"im":0.3},"base":{"type":"irreducible","d":3,"base":{"type":"fuchsian"}}}"#;

fn hyplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyplab")).args(args).output().expect("hyplab runs")
}

fn hyplab_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyplab")).args(args).env(key, value).output().expect("hyplab runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn stderr_error(out: &Output) -> String {
    let err: Value = serde_json::from_slice(&out.stderr).expect("error JSON on stderr");
    err["error"].as_str().unwrap().to_string()
}

fn json(file: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(file).unwrap()).unwrap()
}

/// Data rows of a hyplab CSV, skipping `#` lines.
fn csv_rows(file: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(file).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn fuchsian_spectrum_is_real() {
    let dir = tempfile::tempdir().unwrap();
    let spec = path(dir.path(), "iota3.json");
    fs::write(&spec, IOTA3).unwrap();
    let out = path(dir.path(), "gaps.csv");
    let o = hyplab(&["spectrum", "--rep", &spec, "--max-length", "6", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["word", "length", "k", "re_L", "im_L"]);
    assert_eq!(rows.len(), 80 * 2);
    for row in &rows {
        let length: f64 = row[1].parse().unwrap();
        let re: f64 = row[3].parse().unwrap();
        let im: f64 = row[4].parse().unwrap();
        assert!(im.abs() < 1e-9);
        assert!((re.ln() - length).abs() < 1e-8 * length);
    }
}

#[test]
fn bent_entropy_exceeds_the_fuchsian_fit() {
    let dir = tempfile::tempdir().unwrap();
    let fit = |rep: &str, name: &str| {
        let out = path(dir.path(), name);
        let o = hyplab(&["entropy", "--rep", rep, "--k", "1", "--rmax", "10", "--window", "6:10", "--out", &out]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        json(&out)
    };
    let bent = fit(BENT03, "bent.json");
    let base = fit(IOTA3, "base.json");
    let slope = |v: &Value| v["result"]["slope"].as_f64().unwrap();
    assert!(slope(&bent) > slope(&base), "{} vs {}", slope(&bent), slope(&base));
    assert_eq!(bent["result"]["k"], 1);
    assert_eq!(bent["meta"]["config"]["window"], serde_json::json!([6.0, 10.0]));
}

#[test]
fn fuchsian_limit_set_is_the_unit_circle() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "pts.csv");
    let svg = path(dir.path(), "pts.svg");
    let o = hyplab(&["limitset", "--rep", IOTA3, "--words", "2000", "--out", &out, "--svg", &svg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["word", "angle", "x", "y"]);
    assert!(rows.len() > 500);
    for row in &rows {
        let (x, y): (f64, f64) = (row[2].parse().unwrap(), row[3].parse().unwrap());
        assert!((x.hypot(y) - 1.0).abs() < 1e-8);
    }
    let svg = fs::read_to_string(&svg).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains(r#"width="1024""#));
    assert_eq!(svg.matches(r#"width="1" height="1""#).count(), rows.len());
}

#[test]
fn oracle_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "dim.json");
    let o = hyplab(&["dimension", "--oracle", "circle", "--words", "100000", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert!((v["result"]["fit"]["slope"].as_f64().unwrap() - 1.0).abs() < 0.05);
    assert_eq!(v["result"]["points"], 100_000);
}

#[test]
fn constant_potential_flow() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "growth.json");
    let o = hyplab(&["flow", "--potential", "const:2", "--rmax", "16", "--window", "8:16", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert_eq!(v["result"]["fit"]["bracket"], serde_json::json!([0.5, 0.5]));
    assert_eq!(v["result"]["observed_range"], serde_json::json!([2.0, 2.0]));
}

#[test]
fn outputs_are_byte_identical_across_runs_and_paths() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let run = |args: &[&str]| assert_eq!(hyplab(args).status.code(), Some(0));
        run(&["spectrum", "--rep", BENT03, "--max-length", "5", "--out", &path(dir, "gaps.csv")]);
        run(&["limitset", "--rep", BENT03, "--words", "1000", "--out", &path(dir, "pts.csv"), "--svg", &path(dir, "pts.svg")]);
        run(&["dimension", "--oracle", "koch", "--words", "20000", "--seed", "3", "--out", &path(dir, "dim.json")]);
    }
    for name in ["gaps.csv", "pts.csv", "pts.svg", "dim.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn every_output_carries_version_and_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let spec = path(dir.path(), "bent.json");
    fs::write(&spec, BENT03).unwrap();
    let csv_file = path(dir.path(), "gaps.csv");
    assert_eq!(hyplab(&["spectrum", "--rep", &spec, "--max-length", "4", "--out", &csv_file]).status.code(), Some(0));
    let text = fs::read_to_string(&csv_file).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with(&format!("# hyplab {}", env!("CARGO_PKG_VERSION"))));
    let hash_from_file = lines.next().unwrap().strip_prefix("# config_sha256 ").unwrap().to_string();
    assert_eq!(hash_from_file.len(), 64);

    // The hash covers the spec content, not how it was passed.
    let inline = path(dir.path(), "inline.csv");
    assert_eq!(hyplab(&["spectrum", "--rep", BENT03, "--max-length", "4", "--out", &inline]).status.code(), Some(0));
    assert_eq!(fs::read(&csv_file).unwrap(), fs::read(&inline).unwrap());

    let other = path(dir.path(), "other.csv");
    assert_eq!(hyplab(&["spectrum", "--rep", IOTA3, "--max-length", "4", "--out", &other]).status.code(), Some(0));
    assert!(!fs::read_to_string(&other).unwrap().contains(&hash_from_file));

    let dim = path(dir.path(), "dim.json");
    let svg = path(dir.path(), "dim.svg");
    hyplab(&["dimension", "--oracle", "segment", "--words", "20000", "--out", &dim, "--svg", &svg]);
    let meta = &json(&dim)["meta"];
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    let hash = meta["config_sha256"].as_str().unwrap();
    assert!(fs::read_to_string(&svg).unwrap().contains(hash));
}

#[test]
fn config_errors_exit_2_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "x.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["frobnicate"],
        vec!["entropy", "--rep", IOTA3, "--rmax", "10", "--window", "10:6", "--out", &out],
        vec!["entropy", "--rep", IOTA3, "--rmax", "10", "--window", "6:11", "--out", &out],
        vec!["entropy", "--rep", IOTA3, "--k", "3", "--rmax", "10", "--window", "6:10", "--out", &out],
        vec!["spectrum", "--rep", r#"{"type":"torus"}"#, "--out", &out],
        vec!["spectrum", "--rep", "/nonexistent/spec.json", "--out", &out],
        vec!["spectrum", "--rep", IOTA3, "--max-length", "-1", "--out", &out],
        vec!["flow", "--potential", "const:-1", "--rmax", "10", "--window", "6:10", "--out", &out],
        vec!["flow", "--potential", "wave:1", "--rmax", "10", "--window", "6:10", "--out", &out],
        vec!["verify", "--suite", "15"],
    ];
    for args in cases {
        let o = hyplab(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert_eq!(stderr_error(&o), "ConfigError", "{args:?}");
    }
    let o = hyplab_env(&["verify", "--suite", "13"], "HYPLAB_THREADS", "many");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn computation_errors_exit_3_with_module_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "x.json");
    // (3, 1) has tied moduli at index 2.
    let split = r#"{"type":"composite","parts":[3,1],"base":{"type":"fuchsian"}}"#;
    let o = hyplab(&["entropy", "--rep", split, "--k", "2", "--rmax", "8", "--window", "4:8", "--out", &out]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_error(&o), "InsufficientGap");
    let o = hyplab(&["flow", "--potential", "const:1", "--rmax", "20", "--window", "6:20", "--out", &out]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_error(&o), "BudgetExceeded");
}

#[test]
fn verify_subset_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "report");
    let o = hyplab_env(&["verify", "--suite", "1,12,13,14", "--seed", "3", "--out", &out], "HYPLAB_THREADS", "2");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = stdout.lines().filter(|l| l.starts_with("criterion")).collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|l| l.contains(" PASS ")));
    let report = json(&path(Path::new(&out), "verify.json"));
    assert_eq!(report["result"].as_array().unwrap().len(), 3);
    assert_eq!(report["meta"]["config"]["seed"], 3);
}
