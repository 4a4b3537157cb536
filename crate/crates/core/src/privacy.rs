//! Privacy rules: privacy-policy presence and completeness, permission
//! over-privilege and undeclared use, and the manifest's personal-data
//! disclosure.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::category::{Confidence, DataCategory};
use crate::collection::{DataPractice, PracticeKind};
use crate::diagnostic::Diagnostic;
use crate::fetch::{FetchOutcome, Fetcher};
use crate::finding::{DataSource, Evidence, Finding, RuleId};
use crate::package::{Manifest, PersonalInfoAnswer};
use crate::rules::{Keywords, PolicyRules};
use crate::taint::UsageSet;
use crate::text::{html_visible_text, is_inflection_of, split_sentences, words};

const POLICY_ELEMENT: &str = "manifest privacyAndCompliance";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyStatus {
    Fetched,
    BrokenLink,
    Unrelated,
    UnavailableOffline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDocument {
    pub url: String,
    pub status: PolicyStatus,
    /// Non-empty exactly when `status` is `Fetched`.
    pub sentences: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieved_at: Option<u64>,
    /// HTTP status or transport error for broken links.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisclosureNeed {
    CollectionDisclosure,
    StorageDisclosure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosureCheck {
    pub data_category: DataCategory,
    pub needs: DisclosureNeed,
    pub satisfied: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_sentence: Option<String>,
}

fn relevant(text: &str, rules: &PolicyRules) -> bool {
    words(text)
        .iter()
        .any(|w| rules.relevance_terms.iter().any(|t| w.starts_with(t.as_str())))
}

/// Looks up and classifies the manifest's privacy policy. `None` when the
/// manifest names no policy URL.
pub fn resolve_privacy_policy(
    manifest: Option<&Manifest>,
    fetcher: &dyn Fetcher,
    rules: &PolicyRules,
) -> (Option<PolicyDocument>, Vec<Diagnostic>) {
    let Some(url) = manifest.and_then(Manifest::privacy_policy) else {
        return (None, Vec::new());
    };
    let mut diagnostics = Vec::new();
    let mut doc = PolicyDocument {
        url: url.to_string(),
        status: PolicyStatus::BrokenLink,
        sentences: Vec::new(),
        retrieved_at: None,
        failure: None,
    };
    match fetcher.fetch(url) {
        FetchOutcome::Page(page) => {
            let text = if page.looks_like_html() {
                html_visible_text(&page.body)
            } else {
                page.body.clone()
            };
            doc.retrieved_at = Some(page.retrieved_at);
            if relevant(&text, rules) {
                doc.sentences = split_sentences(&text).into_iter().map(|s| s.text).collect();
            }
            doc.status = if doc.sentences.is_empty() {
                PolicyStatus::Unrelated
            } else {
                PolicyStatus::Fetched
            };
            if page.changed_since_cache == Some(true) {
                diagnostics.push(Diagnostic::info(format!("privacy policy {url} changed since it was last cached")));
            }
        }
        FetchOutcome::HttpStatus(code) => doc.failure = Some(format!("HTTP {code}")),
        FetchOutcome::Failed(e) => doc.failure = Some(e),
        FetchOutcome::Unavailable => {
            doc.status = PolicyStatus::UnavailableOffline;
            diagnostics.push(Diagnostic::warning(format!(
                "privacy policy {url} not checked: not in the page cache (offline)"
            )));
        }
    }
    (Some(doc), diagnostics)
}

fn row(kind: PracticeKind) -> Option<DataSource> {
    match kind {
        PracticeKind::ConversationalRequest => Some(DataSource::Output),
        PracticeKind::PermissionDeclared | PracticeKind::PermissionUsed => Some(DataSource::Permission),
        PracticeKind::DbStore => Some(DataSource::Database),
        PracticeKind::CollectionSlot => None,
    }
}

/// Collection practices grouped by report row (output, permission, database).
fn rows(practices: &[DataPractice]) -> BTreeMap<DataSource, Vec<&DataPractice>> {
    let mut map: BTreeMap<DataSource, Vec<&DataPractice>> = BTreeMap::new();
    for p in practices.iter().filter(|p| p.kind.is_collection()) {
        if let Some(r) = row(p.kind) {
            map.entry(r).or_default().push(p);
        }
    }
    map
}

fn finding_for(rule: RuleId, source: DataSource, message: String, practices: &[&DataPractice]) -> Finding {
    let mut evidence: Vec<Evidence> = practices.iter().map(|p| p.evidence.clone()).collect();
    evidence.sort();
    evidence.dedup();
    let mut iter = evidence.into_iter();
    let first = iter.next().unwrap_or_else(|| Evidence::element(POLICY_ELEMENT, ""));
    let mut f = Finding::new(rule, source, message, first).with_categories(practices.iter().map(|p| p.data_category.clone()));
    for e in iter {
        f = f.with_evidence(e);
    }
    f
}

fn category_list(cats: &BTreeSet<DataCategory>) -> String {
    cats.iter().map(DataCategory::as_str).collect::<Vec<_>>().join(", ")
}

fn plural_eq(token: &str, form: &str) -> bool {
    token == form || token.strip_suffix('s') == Some(form) || token.strip_suffix("es") == Some(form)
}

fn mentions(tokens: &[String], forms: &[Vec<String>]) -> bool {
    forms.iter().any(|form| {
        !form.is_empty()
            && tokens.windows(form.len()).any(|w| {
                w.iter()
                    .zip(form)
                    .enumerate()
                    .all(|(k, (t, f))| if k + 1 == form.len() { plural_eq(t, f) } else { t == f })
            })
    })
}

fn has_verb(tokens: &[String], verbs: &[String]) -> bool {
    tokens.iter().any(|t| verbs.iter().any(|v| is_inflection_of(t, v)))
}

/// True when the sentence denies keeping data: a retention verb preceded by
/// a negation within the configured window.
fn denies_retention(tokens: &[String], rules: &PolicyRules) -> bool {
    tokens.iter().enumerate().any(|(i, t)| {
        let retention = rules
            .store_verbs
            .iter()
            .filter(|v| !rules.deletion_verbs.contains(v))
            .any(|v| is_inflection_of(t, v));
        retention && tokens[i.saturating_sub(rules.negation_window)..i].iter().any(|n| rules.negations.contains(n))
    })
}

/// Completeness of the privacy policy against the skill's practices.
///
/// Every collected category needs a sentence with a collect verb and the
/// category's keyword; every stored category additionally needs one with a
/// (non-negated) store verb. An absent, broken or unrelated policy yields
/// one missing-policy finding per report row; a policy that is unavailable
/// offline is not judged.
pub fn check_policy_completeness(
    doc: Option<&PolicyDocument>,
    practices: &[DataPractice],
    usage: &BTreeMap<DataCategory, UsageSet>,
    keywords: &Keywords,
    rules: &PolicyRules,
) -> (Vec<Finding>, Vec<DisclosureCheck>) {
    let by_row = rows(practices);
    if by_row.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let mut findings = Vec::new();
    let status = doc.map(|d| d.status);
    if matches!(status, Some(PolicyStatus::UnavailableOffline)) {
        return (findings, Vec::new());
    }
    if status != Some(PolicyStatus::Fetched) {
        let (sub, detail, confidence) = match (status, doc) {
            (Some(PolicyStatus::BrokenLink), Some(d)) => (
                "broken-link",
                format!("the privacy policy link {} is broken ({})", d.url, d.failure.as_deref().unwrap_or("no response")),
                Confidence::High,
            ),
            (Some(PolicyStatus::Unrelated), Some(d)) => (
                "unrelated-page",
                format!("the privacy policy link {} does not lead to a privacy policy", d.url),
                Confidence::Heuristic,
            ),
            _ => ("absent", "the manifest provides no privacy policy".to_string(), Confidence::High),
        };
        for (source, ps) in &by_row {
            let cats: BTreeSet<DataCategory> = ps.iter().map(|p| p.data_category.clone()).collect();
            let verb = if *source == DataSource::Database { "stores" } else { "collects" };
            let message = format!("The skill {verb} {} ({}) but {detail}.", category_list(&cats), source.as_str());
            findings.push(
                finding_for(RuleId::MissingPrivacyPolicy, *source, message, ps)
                    .with_sub_rule(sub)
                    .with_confidence(confidence),
            );
        }
        return (findings, Vec::new());
    }
    let doc = doc.expect("fetched status implies a document");
    let tokenized: Vec<(&String, Vec<String>)> = doc.sentences.iter().map(|s| (s, words(s))).collect();

    let mut checks = Vec::new();
    let witness = |cat: &DataCategory, verbs: &[String], storage: bool| -> Option<String> {
        let forms = keywords.forms_for(cat);
        tokenized
            .iter()
            .find(|(_, toks)| {
                mentions(toks, &forms) && has_verb(toks, verbs) && !(storage && denies_retention(toks, rules))
            })
            .map(|(s, _)| (*s).clone())
    };
    let mut failed: BTreeMap<DataSource, BTreeSet<DataCategory>> = BTreeMap::new();
    for (source, ps) in &by_row {
        let cats: BTreeSet<&DataCategory> = ps.iter().map(|p| &p.data_category).filter(|c| !c.is_unknown()).collect();
        for cat in cats {
            let w = witness(cat, &rules.collect_verbs, false);
            if w.is_none() {
                failed.entry(*source).or_default().insert(cat.clone());
            }
            if !checks
                .iter()
                .any(|c: &DisclosureCheck| &c.data_category == cat && c.needs == DisclosureNeed::CollectionDisclosure)
            {
                checks.push(DisclosureCheck {
                    data_category: cat.clone(),
                    needs: DisclosureNeed::CollectionDisclosure,
                    satisfied: w.is_some(),
                    witness_sentence: w,
                });
            }
        }
    }
    let stored: BTreeSet<&DataCategory> = usage
        .iter()
        .filter(|(c, u)| u.database && !c.is_unknown())
        .map(|(c, _)| c)
        .collect();
    for cat in &stored {
        let w = witness(cat, &rules.store_verbs, true);
        if w.is_none() {
            failed.entry(DataSource::Database).or_default().insert((*cat).clone());
        }
        checks.push(DisclosureCheck {
            data_category: (*cat).clone(),
            needs: DisclosureNeed::StorageDisclosure,
            satisfied: w.is_some(),
            witness_sentence: w,
        });
    }

    for (source, cats) in &failed {
        let ps: Vec<&DataPractice> = by_row
            .get(source)
            .map(|ps| ps.iter().copied().filter(|p| cats.contains(&p.data_category)).collect())
            .unwrap_or_default();
        let what = if *source == DataSource::Database { "storage" } else { "collection" };
        let message = format!(
            "The privacy policy at {} does not mention the {what} of {}.",
            doc.url,
            category_list(cats)
        );
        let f = if ps.is_empty() {
            Finding::new(RuleId::IncompletePrivacyPolicy, *source, message, Evidence::element(POLICY_ELEMENT, &doc.url))
                .with_categories(cats.iter().cloned())
        } else {
            finding_for(RuleId::IncompletePrivacyPolicy, *source, message, &ps).with_categories(cats.iter().cloned())
        };
        findings.push(f);
    }

    // a policy denying retention while the code stores data
    if !stored.is_empty() {
        let all_forms: Vec<Vec<String>> = keywords.categories().keys().flat_map(|c| keywords.forms_for(c)).collect();
        let denial = tokenized.iter().find(|(_, toks)| {
            denies_retention(toks, rules)
                && (stored.iter().any(|c| mentions(toks, &keywords.forms_for(c))) || !mentions(toks, &all_forms))
        });
        if let Some((sentence, _)) = denial {
            let db: Vec<&DataPractice> = by_row.get(&DataSource::Database).cloned().unwrap_or_default();
            let cats: BTreeSet<DataCategory> = stored.iter().map(|c| (*c).clone()).collect();
            let message = format!(
                "The privacy policy states \"{}\" but the skill stores {}.",
                sentence.trim(),
                category_list(&cats)
            );
            let mut f = Finding::new(
                RuleId::DeceptivePolicy,
                DataSource::Database,
                message,
                Evidence::element(format!("privacy policy {}", doc.url), sentence),
            )
            .with_categories(cats);
            for p in db {
                f = f.with_evidence(p.evidence.clone());
            }
            findings.push(f);
        }
    }
    (findings, checks)
}

/// Declared versus used permission data. `used` holds the categories whose
/// retrieved permission value reaches a sink.
pub fn check_permission_privilege(practices: &[DataPractice], used: &BTreeSet<DataCategory>) -> Vec<Finding> {
    let mut declared: BTreeMap<&DataCategory, Vec<&DataPractice>> = BTreeMap::new();
    let mut retrieved: BTreeMap<&DataCategory, Vec<&DataPractice>> = BTreeMap::new();
    for p in practices {
        match p.kind {
            PracticeKind::PermissionDeclared => declared.entry(&p.data_category).or_default().push(p),
            PracticeKind::PermissionUsed if !p.data_category.is_unknown() => {
                retrieved.entry(&p.data_category).or_default().push(p)
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    for (cat, ps) in &declared {
        if used.contains(*cat) {
            continue;
        }
        let message = match retrieved.get(cat) {
            Some(_) => format!("Permission data {cat} is requested and retrieved but never used."),
            None => format!("Permission data {cat} is requested but never retrieved."),
        };
        let mut all = ps.clone();
        all.extend(retrieved.get(cat).into_iter().flatten());
        out.push(finding_for(RuleId::OverPrivilegedPermission, DataSource::Permission, message, &all));
    }
    for (cat, ps) in &retrieved {
        if declared.contains_key(cat) {
            continue;
        }
        let message = format!("The code reads permission data {cat} without declaring the permission.");
        out.push(finding_for(RuleId::UndeclaredPermissionUse, DataSource::Permission, message, ps));
    }
    out
}

/// The manifest's answer to "does this skill collect personal information"
/// against the detected practices.
pub fn check_disclosure_consistency(
    manifest: Option<&Manifest>,
    practices: &[DataPractice],
) -> (Vec<Finding>, Vec<Diagnostic>) {
    let Some(manifest) = manifest else {
        return (Vec::new(), Vec::new());
    };
    let collected: Vec<&DataPractice> = practices.iter().filter(|p| p.kind.is_collection()).collect();
    let element = Evidence::element("manifest privacyAndCompliance.usesPersonalInfo", "");
    let cats: BTreeSet<DataCategory> = collected.iter().map(|p| p.data_category.clone()).collect();
    let mut findings = Vec::new();
    let mut diagnostics = Vec::new();
    match manifest.collects_personal_info {
        PersonalInfoAnswer::No if !collected.is_empty() => {
            let mut f = Finding::new(
                RuleId::FalseDisclosure,
                DataSource::Disclosure,
                format!(
                    "The manifest states that no personal information is collected, but the skill collects {}.",
                    category_list(&cats)
                ),
                Evidence { excerpt: "false".into(), ..element },
            )
            .with_categories(cats);
            for p in &collected {
                f = f.with_evidence(p.evidence.clone());
            }
            findings.push(f);
        }
        PersonalInfoAnswer::Unanswered if !collected.is_empty() => {
            findings.push(
                Finding::new(
                    RuleId::UndisclosedToPlatform,
                    DataSource::Disclosure,
                    format!(
                        "The manifest does not say whether personal information is collected; the skill collects {}.",
                        category_list(&cats)
                    ),
                    element,
                )
                .with_categories(cats),
            );
        }
        PersonalInfoAnswer::Yes if collected.is_empty() => diagnostics.push(Diagnostic::info(
            "manifest declares personal-information use but no collection was detected",
        )),
        _ => {}
    }
    (findings, diagnostics)
}
