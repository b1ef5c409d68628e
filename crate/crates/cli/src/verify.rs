//! `verify`: run the acceptance suite, write the report, and check that a
//! rerun with the same seed reproduces the report files byte for byte.

use std::fs;
use std::path::Path;

use serde_json::json;

use hyplab_core::acceptance::{run_criterion, title, CriterionReport, CRITERIA};

use crate::export::{write_csv, write_json, Cell, Meta};
use crate::{CliError, CliResult, VerifyArgs, EXIT_FAILED, EXIT_OK};

pub const DETERMINISM: usize = CRITERIA + 1;
pub const REPORT_FILES: [&str; 2] = ["verify.json", "verify.csv"];

/// `all` or a comma-separated list of criterion numbers, sorted and deduplicated.
pub fn parse_suite(s: &str) -> CliResult<Vec<usize>> {
    if s.trim() == "all" {
        return Ok((1..=DETERMINISM).collect());
    }
    let mut ids = Vec::new();
    for part in s.split(',') {
        let id: usize = part
            .trim()
            .parse()
            .ok()
            .filter(|id| (1..=DETERMINISM).contains(id))
            .ok_or_else(|| CliError::Config(format!("suite '{s}': expected 'all' or numbers in 1..={DETERMINISM}")))?;
        ids.push(id);
    }
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

/// Run the computational criteria among `ids` and write the report into `dir`.
pub fn write_report(ids: &[usize], seed: u64, dir: &Path) -> CliResult<Vec<CriterionReport>> {
    let computed: Vec<usize> = ids.iter().copied().filter(|&id| id <= CRITERIA).collect();
    let reports: Vec<CriterionReport> = computed.iter().map(|&id| run_criterion(id, seed)).collect();
    let meta = Meta::new("verify", &json!({ "command": "verify", "suite": ids, "seed": seed }));
    fs::create_dir_all(dir)?;
    write_json(&dir.join(REPORT_FILES[0]), &meta, &reports)?;
    let mut rows = Vec::new();
    for r in &reports {
        for (name, value) in &r.metrics {
            rows.push(vec![
                Cell::Int(r.id as i64),
                Cell::Text(r.title.clone()),
                Cell::Text(if r.passed { "pass" } else { "fail" }.into()),
                Cell::Text(name.clone()),
                Cell::Float(*value),
            ]);
        }
    }
    write_csv(&dir.join(REPORT_FILES[1]), &meta, &["id", "title", "status", "metric", "value"], &rows, &[])?;
    Ok(reports)
}

pub fn report_line(r: &CriterionReport) -> String {
    let metrics: Vec<String> = r.metrics.iter().map(|(k, v)| format!("{k}={v:.4e}")).collect();
    let mut line = format!(
        "criterion {:>2} {} {}: {}",
        r.id,
        if r.passed { "PASS" } else { "FAIL" },
        r.title,
        metrics.join(" ")
    );
    if !r.detail.is_empty() {
        line.push_str(&format!(" [{}]", r.detail));
    }
    line
}

/// Compare the report files of two runs; returns the names that differ.
pub fn differing_files(a: &Path, b: &Path) -> CliResult<Vec<String>> {
    let mut out = Vec::new();
    for name in REPORT_FILES {
        if fs::read(a.join(name))? != fs::read(b.join(name))? {
            out.push(name.to_string());
        }
    }
    Ok(out)
}

pub fn verify(a: &VerifyArgs) -> CliResult<i32> {
    let ids = parse_suite(&a.suite)?;
    let reports = write_report(&ids, a.seed, &a.out)?;
    let mut passed = 0;
    for r in &reports {
        println!("{}", report_line(r));
        passed += usize::from(r.passed);
    }
    if ids.contains(&DETERMINISM) {
        let rerun = tempfile::tempdir()?;
        write_report(&ids, a.seed, rerun.path())?;
        let differ = differing_files(&a.out, rerun.path())?;
        let mut r = CriterionReport {
            id: DETERMINISM,
            title: title(DETERMINISM).to_string(),
            passed: differ.is_empty(),
            metrics: Default::default(),
            detail: String::new(),
        };
        r.metrics.insert("differing_files".into(), differ.len() as f64);
        if !differ.is_empty() {
            r.detail = format!("rerun differs in {}", differ.join(", "));
        }
        println!("{}", report_line(&r));
        passed += usize::from(r.passed);
    }
    println!("{passed} of {} criteria passed", ids.len());
    Ok(if passed == ids.len() { EXIT_OK } else { EXIT_FAILED })
}
