//! Reports: the per-package result, corpus aggregation, and the text and
//! structured (JSON) renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::category::DataCategory;
use crate::collection::DataPractice;
use crate::content::ExternalResource;
use crate::diagnostic::Diagnostic;
use crate::finding::{DataSource, Finding, RuleGroup, RuleId, Severity};
use crate::privacy::{DisclosureCheck, PolicyDocument};
use crate::taint::{Flow, UsageSet};

/// Version of the structured report layout.
pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageSummary {
    pub root: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skill_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invocation_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_model: Option<String>,
    pub source_units: usize,
    pub handlers: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statistics {
    pub total: usize,
    pub by_severity: BTreeMap<Severity, usize>,
    pub by_rule: BTreeMap<RuleId, usize>,
    pub by_group: BTreeMap<RuleGroup, usize>,
}

impl Statistics {
    pub fn of(findings: &[Finding]) -> Self {
        let mut s = Statistics {
            total: findings.len(),
            ..Default::default()
        };
        for f in findings {
            *s.by_severity.entry(f.severity).or_default() += 1;
            *s.by_rule.entry(f.rule_id).or_default() += 1;
            *s.by_group.entry(f.rule_id.group()).or_default() += 1;
        }
        s
    }
}

/// Volatile facts about one run, kept apart so the rest of the report is
/// byte-stable for identical inputs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunInfo {
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    pub rules_version: String,
    pub package: PackageSummary,
    pub findings: Vec<Finding>,
    pub statistics: Statistics,
    pub practices: Vec<DataPractice>,
    pub data_usage: BTreeMap<DataCategory, UsageSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacy_policy: Option<PolicyDocument>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disclosure_checks: Vec<DisclosureCheck>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub external_resources: Vec<ExternalResource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flows: Option<Vec<Flow>>,
    pub diagnostics: Vec<Diagnostic>,
    pub run: RunInfo,
}

impl Report {
    /// Sorts findings and recomputes statistics. Called once assembly is done.
    pub fn finalize(&mut self) {
        self.findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        self.findings.dedup();
        self.statistics = Statistics::of(&self.findings);
    }

    pub fn count(&self, rule: RuleId) -> usize {
        self.statistics.by_rule.get(&rule).copied().unwrap_or(0)
    }

    pub fn rule_ids(&self) -> Vec<RuleId> {
        self.findings.iter().map(|f| f.rule_id).collect()
    }

    /// True when some finding is at least as severe as `threshold`.
    pub fn fails(&self, threshold: Option<Severity>) -> bool {
        threshold.is_some_and(|t| self.findings.iter().any(|f| f.severity.at_least(t)))
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

fn severity_summary(by: &BTreeMap<Severity, usize>) -> String {
    by.iter().map(|(s, n)| format!("{n} {s}")).collect::<Vec<_>>().join(", ")
}

/// Human-readable rendering with one block per finding.
pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let p = &report.package;
    let _ = writeln!(out, "skill-lint {} (rules {}): {}", report.tool_version, report.rules_version, p.root);
    if let Some(name) = &p.skill_name {
        let _ = write!(out, "skill: {name}");
        if let Some(inv) = &p.invocation_name {
            let _ = write!(out, " (invocation \"{inv}\")");
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "scanned {}, {}, {}",
        plural(p.source_units, "source file"),
        plural(p.handlers, "handler"),
        plural(p.outputs, "output")
    );
    for f in &report.findings {
        out.push('\n');
        let sub = f.sub_rule.as_deref().map(|s| format!(" {s}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{} {} {}{} [{}{}]",
            f.severity,
            f.rule_id,
            f.rule,
            sub,
            f.data_source.as_str(),
            if f.confidence == crate::category::Confidence::Heuristic { ", heuristic" } else { "" }
        );
        let _ = writeln!(out, "  {}", f.message);
        for e in &f.evidence {
            let place = match (&e.location, &e.element) {
                (Some(l), _) => l.to_string(),
                (None, Some(el)) => el.clone(),
                (None, None) => String::new(),
            };
            if e.excerpt.is_empty() {
                let _ = writeln!(out, "  at {place}");
            } else {
                let _ = writeln!(out, "  at {place}: {}", e.excerpt.replace('\n', " "));
            }
        }
        let _ = writeln!(out, "  fix: {}", f.remediation);
    }
    if let Some(flows) = &report.flows {
        out.push_str("\nflows:\n");
        for fl in flows {
            let sink = fl
                .sink
                .as_ref()
                .map(|s| format!("{} at {}", s.site.callee_path, s.site.location))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "  {} {} ({}) -> {:?}: {} via {} step(s)",
                fl.source.data_category,
                fl.source.variable,
                fl.source.origin.location,
                fl.usage,
                sink,
                fl.path.len()
            );
        }
    }
    if !report.diagnostics.is_empty() {
        out.push_str("\ndiagnostics:\n");
        for d in &report.diagnostics {
            let _ = writeln!(out, "  {d}");
        }
    }
    out.push('\n');
    if report.findings.is_empty() {
        out.push_str("no findings\n");
    } else {
        let _ = writeln!(
            out,
            "{} ({})",
            plural(report.statistics.total, "finding"),
            severity_summary(&report.statistics.by_severity)
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PackageOutcome {
    Analyzed { report: Box<Report> },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageEntry {
    pub path: String,
    #[serde(flatten)]
    pub outcome: PackageOutcome,
}

/// One aggregate row: a rule and the part of the skill its evidence came
/// from, with the number of findings and of distinct packages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub group: RuleGroup,
    pub rule_id: RuleId,
    pub problem: String,
    pub data_source: DataSource,
    pub findings: usize,
    pub packages: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregate {
    pub packages: usize,
    pub failed_packages: usize,
    pub packages_with_findings: usize,
    pub rows: Vec<AggregateRow>,
    pub statistics: Statistics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub rules_version: String,
    pub aggregate: Aggregate,
    pub packages: Vec<PackageEntry>,
    pub run: RunInfo,
}

impl CorpusReport {
    /// Builds the aggregate from per-package entries, sorted by path.
    pub fn new(rules_version: &str, mut packages: Vec<PackageEntry>, elapsed_ms: u64) -> Self {
        packages.sort_by(|a, b| a.path.cmp(&b.path));
        let mut rows: BTreeMap<(RuleGroup, RuleId, DataSource), (usize, usize)> = BTreeMap::new();
        let mut all = Vec::new();
        let mut agg = Aggregate {
            packages: packages.len(),
            ..Default::default()
        };
        for p in &packages {
            match &p.outcome {
                PackageOutcome::Failed { .. } => agg.failed_packages += 1,
                PackageOutcome::Analyzed { report } => {
                    if !report.findings.is_empty() {
                        agg.packages_with_findings += 1;
                    }
                    let mut seen = std::collections::BTreeSet::new();
                    for f in &report.findings {
                        let key = (f.rule_id.group(), f.rule_id, f.data_source);
                        let e = rows.entry(key).or_default();
                        e.0 += 1;
                        if seen.insert(key) {
                            e.1 += 1;
                        }
                    }
                    all.extend(report.findings.iter().cloned());
                }
            }
        }
        agg.rows = rows
            .into_iter()
            .map(|((group, rule_id, data_source), (findings, packages))| AggregateRow {
                group,
                rule_id,
                problem: rule_id.problem().to_string(),
                data_source,
                findings,
                packages,
            })
            .collect();
        agg.statistics = Statistics::of(&all);
        CorpusReport {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            rules_version: rules_version.to_string(),
            aggregate: agg,
            packages,
            run: RunInfo { elapsed_ms },
        }
    }

    pub fn fails(&self, threshold: Option<Severity>) -> bool {
        self.packages.iter().any(|p| match &p.outcome {
            PackageOutcome::Analyzed { report } => report.fails(threshold),
            PackageOutcome::Failed { .. } => false,
        })
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Aggregate table grouped by rule group, then a line per package.
pub fn render_corpus_text(report: &CorpusReport) -> String {
    let a = &report.aggregate;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "skill-lint {} (rules {}): {} packages, {} with findings, {} failed to load",
        report.tool_version,
        report.rules_version,
        a.packages,
        a.packages_with_findings,
        a.failed_packages
    );
    let problem_width = a.rows.iter().map(|r| r.problem.len()).max().unwrap_or(7).max(7);
    let mut group = None;
    for r in &a.rows {
        if group != Some(r.group) {
            group = Some(r.group);
            let _ = writeln!(out, "\n{}", r.group.title());
            let _ = writeln!(
                out,
                "  {:<8} {:<problem_width$} {:<15} {:>8} {:>8}",
                "rule", "problem", "data source", "findings", "packages"
            );
        }
        let _ = writeln!(
            out,
            "  {:<8} {:<problem_width$} {:<15} {:>8} {:>8}",
            r.rule_id.code(),
            r.problem,
            r.data_source.as_str(),
            r.findings,
            r.packages
        );
    }
    out.push_str("\npackages:\n");
    for p in &report.packages {
        match &p.outcome {
            PackageOutcome::Analyzed { report } => {
                let ids: Vec<&str> = report.findings.iter().map(|f| f.rule_id.code()).collect();
                let _ = writeln!(
                    out,
                    "  {}: {}",
                    p.path,
                    if ids.is_empty() { "no findings".to_string() } else { ids.join(" ") }
                );
            }
            PackageOutcome::Failed { error } => {
                let _ = writeln!(out, "  {}: error: {error}", p.path);
            }
        }
    }
    let _ = writeln!(
        out,
        "\n{} ({})",
        plural(a.statistics.total, "finding"),
        severity_summary(&a.statistics.by_severity)
    );
    out
}
