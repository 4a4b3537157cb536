//! The full pipeline: load, extract, then run each checker and assemble a
//! report.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::backend::extract_backend_model;
use crate::category::{Confidence, DataCategory};
use crate::collection::{
    detect_collection_requests, detect_conversational_collection, detect_permission_practices, DataPractice,
    PracticeKind,
};
use crate::consistency::{check_consistency, model_gaps};
use crate::content::{
    check_category_rules, check_rating_solicitation, check_toxicity, extract_external_resources,
    screen_external_resources, LexiconScorer, ReputationClient, Screeners, ToxicityScorer,
};
use crate::diagnostic::{LineIndex, SourceLocation};
use crate::fetch::{Fetcher, NoFetch};
use crate::finding::{DataSource, Evidence, Finding, RuleId, Severity};
use crate::model::{check_invocation_name, classify_collection_utterances, classify_sensitive_slots};
use crate::package::{load_skill_package, SkillPackage};
use crate::privacy::{
    check_disclosure_consistency, check_permission_privilege, check_policy_completeness, resolve_privacy_policy,
};
use crate::report::{CorpusReport, PackageEntry, PackageOutcome, PackageSummary, Report, RunInfo, SCHEMA_VERSION, TOOL_VERSION};
use crate::rules::RuleSet;
use crate::taint::{compute_flows, identify_sources, summarize_usage, unknown_sinks, Usage};

/// Everything the pipeline needs besides the package itself.
pub struct Config {
    pub rules: RuleSet,
    pub fetcher: Box<dyn Fetcher>,
    pub scorer: Box<dyn ToxicityScorer>,
    pub reputation: Option<Box<dyn ReputationClient>>,
    /// Keep advisory findings (distinctiveness, unknown sinks, unanswered
    /// disclosure) in the report.
    pub enable_advisories: bool,
    pub emit_flows: bool,
}

impl Default for Config {
    /// Bundled rules, no network, lexicon scorer, no reputation source.
    fn default() -> Self {
        Config {
            rules: RuleSet::default(),
            fetcher: Box::new(NoFetch),
            scorer: Box::new(LexiconScorer::bundled()),
            reputation: None,
            enable_advisories: false,
            emit_flows: false,
        }
    }
}

/// Loads and analyzes the package rooted at `root`.
pub fn analyze(root: impl AsRef<Path>, config: &Config) -> crate::Result<Report> {
    let started = Instant::now();
    let package = load_skill_package(root)?;
    let mut report = analyze_package(&package, config);
    report.run.elapsed_ms = started.elapsed().as_millis() as u64;
    Ok(report)
}

/// Finds where a manifest permission is declared, falling back to the
/// manifest element when the file cannot be read.
fn permission_locator(package: &SkillPackage) -> impl Fn(&str) -> Evidence + '_ {
    let text = package
        .manifest_path
        .as_ref()
        .and_then(|p| package.read_member(p).map(|t| (p.clone(), t)));
    let index = text.as_ref().map(|(_, t)| LineIndex::new(t));
    move |name: &str| {
        if let (Some((path, text)), Some(index)) = (&text, &index) {
            if let Some(offset) = text.find(&format!("\"{name}\"")) {
                let (line, column) = index.position(text, offset);
                return Evidence::at(SourceLocation::new(path.clone(), line, column), name);
            }
        }
        Evidence::element("manifest permissions", name)
    }
}

/// Runs every stage over an already loaded package.
pub fn analyze_package(package: &SkillPackage, config: &Config) -> Report {
    let rules = &config.rules;
    let manifest = package.manifest.as_ref();
    let model = package.interaction_model.as_ref();
    let mut diagnostics = package.load_diagnostics.clone();
    let mut findings: Vec<Finding> = Vec::new();

    let sensitive = model
        .map(|m| classify_sensitive_slots(m, &rules.keywords))
        .unwrap_or_default();
    let utterances = model
        .map(|m| classify_collection_utterances(m, &sensitive, &rules.collection.utterance_possessives))
        .unwrap_or_default();
    let backend = extract_backend_model(&package.backend_units, &rules.patterns);
    diagnostics.extend(backend.diagnostics.iter().cloned());

    // collection
    let requests = detect_collection_requests(&backend.outputs, &rules.collection, &rules.keywords);
    let (mut practices, mut gaps) =
        detect_conversational_collection(model, &requests, &sensitive, &utterances, &|r| r.output.text.clone());
    let locate = permission_locator(package);
    practices.extend(detect_permission_practices(manifest, &backend, &rules.patterns, &locate));

    // data flow
    let sources = identify_sources(&backend, &sensitive, &rules.keywords);
    let flows = compute_flows(&backend, &sources);
    let usage = summarize_usage(&flows);
    let mut stored = BTreeSet::new();
    for f in flows.iter().filter(|f| f.usage == Usage::Database) {
        let Some(sink) = &f.sink else { continue };
        if stored.insert((f.source.data_category.clone(), sink.site.location.clone())) {
            practices.push(DataPractice {
                kind: PracticeKind::DbStore,
                data_category: f.source.data_category.clone(),
                evidence: Evidence::at(sink.site.location.clone(), &sink.site.callee_path),
                confidence: Confidence::High,
            });
        }
    }
    let used: BTreeSet<DataCategory> = flows
        .iter()
        .filter(|f| f.source.origin.kind.is_permission() && f.usage != Usage::Unused)
        .map(|f| f.source.data_category.clone())
        .collect();

    // privacy
    let (policy, policy_diags) = resolve_privacy_policy(manifest, config.fetcher.as_ref(), &rules.policy);
    diagnostics.extend(policy_diags);
    let (policy_findings, disclosure_checks) =
        check_policy_completeness(policy.as_ref(), &practices, &usage, &rules.keywords, &rules.policy);
    findings.extend(policy_findings);
    findings.extend(check_permission_privilege(&practices, &used));
    let (disclosure_findings, disclosure_diags) = check_disclosure_consistency(manifest, &practices);
    findings.extend(disclosure_findings);
    diagnostics.extend(disclosure_diags);

    // content
    if model.is_some() || manifest.is_some() {
        let name = model.map(|m| m.invocation_name.as_str()).unwrap_or("");
        findings.extend(check_invocation_name(name, &rules.invocation, config.enable_advisories));
    }
    let (toxic, toxic_diags) = check_toxicity(&backend.outputs, config.scorer.as_ref(), rules.content.toxicity_threshold);
    findings.extend(toxic);
    diagnostics.extend(toxic_diags);
    findings.extend(check_rating_solicitation(
        &backend.outputs,
        manifest.and_then(|m| m.description.as_deref()),
        &rules.content,
    ));
    let mut resources = extract_external_resources(&backend);
    let screeners = Screeners {
        reputation: config.reputation.as_deref(),
        fetcher: config.fetcher.as_ref(),
        scorer: config.scorer.as_ref(),
        threshold: rules.content.toxicity_threshold,
        collection: &rules.collection,
        keywords: &rules.keywords,
    };
    let (resource_findings, resource_diags) = screen_external_resources(&mut resources, &screeners);
    findings.extend(resource_findings);
    diagnostics.extend(resource_diags);
    findings.extend(check_category_rules(manifest, &requests, &practices, &resources, &rules.content));

    // consistency
    if let Some(m) = model {
        gaps.extend(model_gaps(m, &sensitive));
        findings.extend(check_consistency(m, &gaps));
    }

    for s in unknown_sinks(&backend, &sources) {
        let args: Vec<&str> = s.tainted_args.iter().map(String::as_str).collect();
        findings.push(
            Finding::new(
                RuleId::UnknownSink,
                DataSource::Output,
                format!(
                    "{} data in {} reaches {}({}), a call the analysis does not model; check where it goes.",
                    s.data_category,
                    s.source_variable,
                    s.callee_path,
                    args.join(", ")
                ),
                Evidence::at(s.location.clone(), &s.callee_path),
            )
            .with_categories([s.data_category.clone()])
            .with_confidence(Confidence::Heuristic),
        );
    }

    if !config.enable_advisories {
        findings.retain(|f| f.severity != Severity::Advisory);
    }
    diagnostics.sort();
    diagnostics.dedup();

    let handlers = backend.units.iter().map(|u| u.handlers.len()).sum();
    let mut report = Report {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        rules_version: rules.rules_version.clone(),
        package: PackageSummary {
            root: package.root_path.display().to_string(),
            skill_name: manifest.map(|m| m.skill_name.clone()).filter(|n| !n.is_empty()),
            invocation_name: model.map(|m| m.invocation_name.clone()).filter(|n| !n.is_empty()),
            category: manifest.and_then(|m| m.category.clone()),
            manifest: package.manifest_path.as_ref().map(|p| p.display().to_string()),
            interaction_model: package.model_path.as_ref().map(|p| p.display().to_string()),
            source_units: backend.units.len(),
            handlers,
            outputs: backend.outputs.len(),
        },
        findings,
        statistics: Default::default(),
        practices,
        data_usage: usage,
        privacy_policy: policy,
        disclosure_checks,
        external_resources: resources,
        flows: config.emit_flows.then_some(flows),
        diagnostics,
        run: RunInfo::default(),
    };
    report.finalize();
    report
}

/// Package directories of a corpus: the immediate subdirectories, sorted.
pub fn corpus_members(dir: &Path) -> crate::Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|source| crate::Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_ok_and(|t| t.is_dir()))
        .filter(|e| !e.file_name().to_string_lossy().starts_with('.'))
        .map(|e| e.path())
        .collect();
    out.sort();
    Ok(out)
}

/// Analyzes every package of a corpus on `jobs` threads (0 picks the
/// number of CPUs). A package that fails to load is recorded, not fatal.
pub fn analyze_corpus(dir: &Path, config: &Config, jobs: usize) -> crate::Result<CorpusReport> {
    let started = Instant::now();
    let members = corpus_members(dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| crate::Error::ThreadPool(e.to_string()))?;
    let entries: Vec<PackageEntry> = pool.install(|| {
        members
            .par_iter()
            .map(|p| {
                let path = p
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| p.display().to_string());
                let outcome = match analyze(p, config) {
                    Ok(report) => PackageOutcome::Analyzed { report: Box::new(report) },
                    Err(e) => PackageOutcome::Failed { error: e.to_string() },
                };
                PackageEntry { path, outcome }
            })
            .collect()
    });
    Ok(CorpusReport::new(
        &config.rules.rules_version,
        entries,
        started.elapsed().as_millis() as u64,
    ))
}
