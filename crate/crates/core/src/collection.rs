//! Sensitive data-collection activity: conversational requests found in
//! outputs, permission-based collection, and the practice set the privacy
//! checks consume.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendModel, OutputString};
use crate::category::{Confidence, DataCategory};
use crate::finding::Evidence;
use crate::model::{CollectionUtterance, InteractionModel, SensitiveSlot};
use crate::package::Manifest;
use crate::rules::{CollectionRules, Keywords, PatternRegistry};
use crate::text::{self, is_inflection_of, sentence_similarity, split_sentences, strip_ssml, words};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PracticeKind {
    ConversationalRequest,
    CollectionSlot,
    PermissionDeclared,
    PermissionUsed,
    DbStore,
}

impl PracticeKind {
    /// Practices that require a privacy policy. A sensitive slot alone does
    /// not: without a request or a stored value nothing is known to be
    /// collected.
    pub fn is_collection(self) -> bool {
        !matches!(self, PracticeKind::CollectionSlot)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPractice {
    pub kind: PracticeKind,
    pub data_category: DataCategory,
    pub evidence: Evidence,
    pub confidence: Confidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RequestTrigger {
    YourNounPattern,
    CommonSentence,
}

/// A request for personal data found in one sentence of a text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRequest {
    pub sentence: String,
    pub data_category: DataCategory,
    pub trigger: RequestTrigger,
    pub confidence: Confidence,
    /// Registry keyword or common sentence that matched.
    pub matched: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionRequest {
    pub output: OutputString,
    pub sentence: String,
    pub data_category: DataCategory,
    pub trigger: RequestTrigger,
    pub confidence: Confidence,
    pub matched: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapKind {
    RequestWithoutSlot,
    SlotWithoutRequest,
    SlotWithoutUtterance,
    IntentWithoutUtterance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapSubject {
    Request(Box<CollectionRequest>),
    Slot(SensitiveSlot),
    Intent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyGap {
    pub kind: GapKind,
    pub subject: GapSubject,
}

fn clauses(sentence_words: &[String], raw: &str) -> Vec<(usize, usize)> {
    // clause boundaries follow , ; : in the raw sentence; map them onto word
    // indices by counting words per clause
    let mut bounds = Vec::new();
    let mut start = 0;
    for piece in raw.split([',', ';', ':']) {
        let n = words(piece).len();
        bounds.push((start, (start + n).min(sentence_words.len())));
        start += n;
    }
    if bounds.is_empty() {
        bounds.push((0, sentence_words.len()));
    }
    bounds
}

fn plural_eq(token: &str, keyword: &str) -> bool {
    token == keyword || token.strip_suffix('s') == Some(keyword) || token.strip_suffix("es") == Some(keyword)
}

fn find_form_at(tokens: &[String], at: usize, forms: &[(Vec<String>, DataCategory)]) -> Option<(usize, usize)> {
    forms.iter().enumerate().find_map(|(fi, (form, _))| {
        let end = at + form.len();
        if end > tokens.len() {
            return None;
        }
        let ok = tokens[at..end]
            .iter()
            .zip(form)
            .enumerate()
            .all(|(k, (t, f))| if k + 1 == form.len() { plural_eq(t, f) } else { t == f });
        ok.then_some((fi, end))
    })
}

/// Requests for personal data in free text (outputs, fetched webpages).
///
/// A sentence is a request when a registry keyword follows a request
/// possessive ("your", up to `max_interleaving_adjectives` words between)
/// and the sentence is a question or a solicitation verb precedes the
/// possessive in the same clause; or when the sentence closely matches a
/// known request sentence.
pub fn detect_requests_in_text(text: &str, rules: &CollectionRules, keywords: &Keywords) -> Vec<SentenceRequest> {
    let forms = keywords.text_forms();
    let mut out: Vec<SentenceRequest> = Vec::new();
    for sentence in split_sentences(&strip_ssml(text)) {
        let tokens = words(&sentence.text);
        let mut found: Vec<SentenceRequest> = Vec::new();
        let clause_bounds = clauses(&tokens, &sentence.text);
        for (k, tok) in tokens.iter().enumerate() {
            if !rules.request_possessives.iter().any(|p| p == tok) {
                continue;
            }
            let hit = (k + 1..=k + 1 + rules.max_interleaving_adjectives)
                .take_while(|&at| at < tokens.len() && !tokens[at].starts_with(text::HOLE_OPEN))
                .find_map(|at| find_form_at(&tokens, at, &forms));
            let Some((fi, _)) = hit else { continue };
            let clause = clause_bounds.iter().find(|(s, e)| *s <= k && k < *e).copied().unwrap_or((0, tokens.len()));
            let solicited = tokens[clause.0..k]
                .iter()
                .any(|t| rules.solicitation_verbs.iter().any(|v| is_inflection_of(t, v)));
            if !(sentence.is_question() || solicited) {
                continue;
            }
            let (form, category) = &forms[fi];
            if found.iter().any(|r| &r.data_category == category) {
                continue;
            }
            found.push(SentenceRequest {
                sentence: sentence.text.clone(),
                data_category: category.clone(),
                trigger: RequestTrigger::YourNounPattern,
                confidence: Confidence::High,
                matched: form.join(" "),
            });
        }
        for common in &rules.common_request_sentences {
            if found.iter().any(|r| r.data_category == common.category) {
                continue;
            }
            if sentence_similarity(&sentence.text, &common.text) >= rules.fuzzy_threshold {
                found.push(SentenceRequest {
                    sentence: sentence.text.clone(),
                    data_category: common.category.clone(),
                    trigger: RequestTrigger::CommonSentence,
                    confidence: common.confidence,
                    matched: common.text.clone(),
                });
            }
        }
        out.extend(found);
    }
    out
}

/// Collection requests in back-end outputs, at most one per output and
/// data category.
pub fn detect_collection_requests(outputs: &[OutputString], rules: &CollectionRules, keywords: &Keywords) -> Vec<CollectionRequest> {
    let mut out = Vec::new();
    for output in outputs {
        let mut seen = BTreeSet::new();
        for r in detect_requests_in_text(&output.text, rules, keywords) {
            if !seen.insert(r.data_category.clone()) {
                continue;
            }
            out.push(CollectionRequest {
                output: output.clone(),
                sentence: r.sentence,
                data_category: r.data_category,
                trigger: r.trigger,
                confidence: r.confidence,
                matched: r.matched,
            });
        }
    }
    out
}

fn request_evidence(r: &CollectionRequest, excerpt: &str) -> Evidence {
    Evidence::at(r.output.location.clone(), excerpt)
}

/// Combines requests, sensitive slots and collection utterances.
///
/// Each request either becomes a conversational practice (a sensitive slot
/// of the same category is reachable through at least one sample utterance)
/// or a request-without-slot gap. Each reachable sensitive slot whose
/// category no request asks for becomes a slot-without-request gap; slots no
/// utterance references are left to the utterance rules. `excerpt_of`
/// supplies the evidence excerpt for a request.
pub fn detect_conversational_collection(
    model: Option<&InteractionModel>,
    requests: &[CollectionRequest],
    sensitive_slots: &[SensitiveSlot],
    collection_utterances: &[CollectionUtterance],
    excerpt_of: &dyn Fn(&CollectionRequest) -> String,
) -> (Vec<DataPractice>, Vec<ConsistencyGap>) {
    let mut practices = Vec::new();
    let mut gaps = Vec::new();
    let reachable = |s: &SensitiveSlot| s.slot.utterances_referencing > 0;
    for r in requests {
        let absorbed = sensitive_slots
            .iter()
            .any(|s| s.label.category == r.data_category && reachable(s))
            || collection_utterances.iter().any(|u| u.category == r.data_category);
        if absorbed {
            practices.push(DataPractice {
                kind: PracticeKind::ConversationalRequest,
                data_category: r.data_category.clone(),
                evidence: request_evidence(r, &excerpt_of(r)),
                confidence: r.confidence,
            });
        } else {
            gaps.push(ConsistencyGap {
                kind: GapKind::RequestWithoutSlot,
                subject: GapSubject::Request(Box::new(r.clone())),
            });
        }
    }
    for s in sensitive_slots {
        practices.push(DataPractice {
            kind: PracticeKind::CollectionSlot,
            data_category: s.label.category.clone(),
            evidence: Evidence::element(format!("intent {} / slot {}", s.intent, s.slot.name), &s.slot.slot_type),
            confidence: Confidence::Heuristic,
        });
        let builtin = model.is_some_and(|m| m.intent(&s.intent).is_some_and(|i| i.is_builtin()));
        if reachable(s) && !builtin && !requests.iter().any(|r| r.data_category == s.label.category) {
            gaps.push(ConsistencyGap {
                kind: GapKind::SlotWithoutRequest,
                subject: GapSubject::Slot(s.clone()),
            });
        }
    }
    (practices, gaps)
}

/// Declared manifest permissions and permission data retrieved in code.
/// `locate` maps a manifest permission name to evidence (normally a
/// location inside the manifest file).
pub fn detect_permission_practices(
    manifest: Option<&Manifest>,
    backend: &BackendModel,
    registry: &PatternRegistry,
    locate: &dyn Fn(&str) -> Evidence,
) -> Vec<DataPractice> {
    let mut out = Vec::new();
    if let Some(m) = manifest {
        for p in &m.permissions {
            if let Some(category) = registry.manifest_permission_category(p) {
                out.push(DataPractice {
                    kind: PracticeKind::PermissionDeclared,
                    data_category: category.clone(),
                    evidence: locate(p),
                    confidence: Confidence::High,
                });
            }
        }
    }
    for call in backend.api_calls.iter().filter(|c| c.kind.is_permission()) {
        let category = call.category.clone().unwrap_or_else(DataCategory::unknown);
        let confidence = if category.is_unknown() {
            Confidence::Heuristic
        } else {
            Confidence::High
        };
        out.push(DataPractice {
            kind: PracticeKind::PermissionUsed,
            data_category: category,
            evidence: Evidence::at(call.location.clone(), &call.callee_path),
            confidence,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostic::SourceLocation;
    use crate::rules::RuleSet;

    fn output(text: &str) -> OutputString {
        OutputString {
            text: text.to_string(),
            holes: Vec::new(),
            location: SourceLocation::new("index.js", 1, 1),
            handler: None,
            scope: crate::backend::Scope { unit: 0, handler: None },
        }
    }

    fn requests(text: &str) -> Vec<SentenceRequest> {
        let rules = RuleSet::default();
        detect_requests_in_text(text, &rules.collection, &rules.keywords)
    }

    fn categories(text: &str) -> Vec<String> {
        requests(text).into_iter().map(|r| r.data_category.to_string()).collect()
    }

    #[test]
    fn positive_exemplars() {
        assert_eq!(categories("Hello! What is your name?"), ["Name"]);
        assert_eq!(categories("Kindly tell me your name"), ["Name"]);
        assert_eq!(categories("How old are you"), ["Age"]);
        assert_eq!(categories("You can introduce yourself by telling me your name"), ["Name"]);
        assert_eq!(categories("Can you tell me your birthday?"), ["Birthday"]);
    }

    #[test]
    fn declaratives_are_not_requests() {
        assert!(categories("Your location is around ⟨x⟩").is_empty());
        assert!(categories("Your name has been saved.").is_empty());
        assert!(categories("").is_empty());
    }

    #[test]
    fn interleaving_adjectives() {
        assert_eq!(categories("Please tell me your full name."), ["Name"]);
        assert_eq!(categories("What is your current home address?"), ["Address"]);
        // three words between is too far
        assert!(categories("What is your very nice new shiny name?").is_empty());
    }

    #[test]
    fn multiword_and_alias_keywords() {
        assert_eq!(categories("What's your phone number?"), ["PhoneNumber"]);
        assert_eq!(categories("Please say your zip code."), ["PostalCode"]);
        assert_eq!(categories("What is your e-mail?"), ["Email"]);
    }

    #[test]
    fn heuristic_common_sentences() {
        let r = requests("How should I call you?");
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].confidence, Confidence::Heuristic);
        assert_eq!(r[0].trigger, RequestTrigger::CommonSentence);
    }

    #[test]
    fn case_and_whitespace_invariance() {
        assert_eq!(categories("  WHAT IS YOUR NAME?  "), ["Name"]);
        assert_eq!(categories("what is your name"), ["Name"]);
    }

    #[test]
    fn ssml_is_stripped() {
        assert_eq!(categories("<speak>Welcome!<break time='1s'/>What is your <emphasis>name</emphasis>?</speak>"), ["Name"]);
    }

    #[test]
    fn one_request_per_output_and_category() {
        let rules = RuleSet::default();
        let outs = [output("What is your name? Tell me your name again.")];
        let r = detect_collection_requests(&outs, &rules.collection, &rules.keywords);
        assert_eq!(r.len(), 1);
    }

    fn model(samples: &[&str]) -> InteractionModel {
        let samples: Vec<String> = samples.iter().map(|s| format!("\"{s}\"")).collect();
        let text = format!(
            r#"{{"intents":[{{"name":"NameIntent","slots":[{{"name":"name","type":"AMAZON.FirstName"}}],"samples":[{}]}}]}}"#,
            samples.join(",")
        );
        InteractionModel::parse(&text).unwrap().0
    }

    fn run(model: &InteractionModel, texts: &[&str]) -> (Vec<DataPractice>, Vec<ConsistencyGap>) {
        let rules = RuleSet::default();
        let outs: Vec<OutputString> = texts.iter().map(|t| output(t)).collect();
        let reqs = detect_collection_requests(&outs, &rules.collection, &rules.keywords);
        let slots = crate::model::classify_sensitive_slots(model, &rules.keywords);
        let utts = crate::model::classify_collection_utterances(model, &slots, &rules.collection.utterance_possessives);
        detect_conversational_collection(Some(model), &reqs, &slots, &utts, &|r| r.sentence.clone())
    }

    #[test]
    fn request_absorbed_by_sensitive_slot() {
        let (practices, gaps) = run(&model(&["My name is {name}"]), &["Hello! What is your name?"]);
        let conv: Vec<_> = practices.iter().filter(|p| p.kind == PracticeKind::ConversationalRequest).collect();
        assert_eq!(conv.len(), 1);
        assert_eq!(conv[0].data_category.as_str(), "Name");
        assert_eq!(conv[0].confidence, Confidence::High);
        assert!(gaps.is_empty());
    }

    #[test]
    fn request_without_slot() {
        let m = InteractionModel::parse(r#"{"intents":[{"name":"HelloIntent","samples":["hello"]}]}"#).unwrap().0;
        let (practices, gaps) = run(&m, &["What is your name?"]);
        assert!(practices.is_empty());
        assert_eq!(gaps.len(), 1);
        assert_eq!(gaps[0].kind, GapKind::RequestWithoutSlot);
    }

    #[test]
    fn slot_without_request() {
        let (practices, gaps) = run(&model(&["My name is {name}"]), &["Welcome back."]);
        assert_eq!(practices.len(), 1);
        assert_eq!(practices[0].kind, PracticeKind::CollectionSlot);
        assert_eq!(gaps.len(), 1);
        assert_eq!(gaps[0].kind, GapKind::SlotWithoutRequest);
    }

    #[test]
    fn unreferenced_slot_is_not_a_gap() {
        let (_, gaps) = run(&model(&["hello"]), &["Welcome back."]);
        assert!(gaps.is_empty());
    }

    fn manifest_with(perms: &[&str]) -> Manifest {
        let list: Vec<String> = perms.iter().map(|p| format!(r#"{{"name":"{p}"}}"#)).collect();
        crate::package::parse_manifest(&format!(r#"{{"manifest":{{"permissions":[{}]}}}}"#, list.join(",")))
            .unwrap()
            .0
    }

    fn permission_practices(manifest: Option<&Manifest>, src: &str) -> Vec<DataPractice> {
        let rules = RuleSet::default();
        let unit = crate::package::SourceUnit::new("index.js", crate::package::Dialect::JsStyle, src.to_string());
        let backend = crate::backend::extract_backend_model(&[unit], &rules.patterns);
        detect_permission_practices(manifest, &backend, &rules.patterns, &|p| Evidence::element("skill.json", p))
    }

    #[test]
    fn declared_permission() {
        let m = manifest_with(&["alexa::profile:email:read", "alexa::unknown:thing"]);
        let p = permission_practices(Some(&m), "");
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].kind, PracticeKind::PermissionDeclared);
        assert_eq!(p[0].data_category.as_str(), "Email");
    }

    #[test]
    fn used_permission_endpoint() {
        let p = permission_practices(None, "const url = apiEndpoint + '/v2/accounts/~current/settings/Profile.name';\n");
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].kind, PracticeKind::PermissionUsed);
        assert_eq!(p[0].data_category.as_str(), "Name");
        assert_eq!(p[0].confidence, Confidence::High);
    }

    #[test]
    fn unknown_endpoint_is_heuristic() {
        let p = permission_practices(None, "const url = '/v2/accounts/~current/settings/Profile.nickname';\n");
        assert_eq!(p.len(), 1);
        assert!(p[0].data_category.is_unknown());
        assert_eq!(p[0].confidence, Confidence::Heuristic);
    }

    #[test]
    fn nothing_declared_or_used() {
        assert!(permission_practices(None, "const x = 1;\n").is_empty());
    }
}
