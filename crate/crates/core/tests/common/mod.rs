//! Shared helpers for the integration tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use skill_lint::report::Report;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures_dir().join("packages").join(name)
}

#[derive(serde::Deserialize)]
struct Expected {
    findings: Vec<String>,
}

/// `RULE/data-source` keys from a package's `expected.toml`, sorted.
pub fn expected_findings(package: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(package.join("expected.toml")).expect("expected.toml");
    let mut keys = toml::from_str::<Expected>(&text).expect("expected.toml parses").findings;
    keys.sort();
    keys
}

/// `RULE/data-source` keys of a report, sorted.
pub fn finding_keys(report: &Report) -> Vec<String> {
    let mut keys: Vec<String> = report
        .findings
        .iter()
        .map(|f| format!("{}/{}", f.rule_id.code(), f.data_source.as_str()))
        .collect();
    keys.sort();
    keys
}
