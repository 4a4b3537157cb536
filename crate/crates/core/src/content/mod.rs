//! Content guidelines: toxic responses, rating solicitation, external
//! resources and the Kids / Health category rules.

pub mod reputation;
pub mod scorer;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::backend::{BackendModel, OutputString};
use crate::category::DataCategory;
use crate::collection::{detect_requests_in_text, CollectionRequest, DataPractice, PracticeKind};
use crate::diagnostic::{Diagnostic, SourceLocation};
use crate::fetch::{FetchOutcome, Fetcher};
use crate::finding::{DataSource, Evidence, Finding, RuleId};
use crate::package::Manifest;
use crate::rules::{CollectionRules, ContentRules, Keywords};
use crate::text::{self, html_visible_text, is_inflection_of, split_sentences, strip_ssml, words};

pub use reputation::{Denylist, RemoteReputation, Reputation, ReputationClient};
pub use scorer::{LexiconScorer, RemoteScorer, ScorerKind, ScorerUnavailable, ToxicityScore, ToxicityScorer};

/// Resources screened at the same time.
pub const MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MediaKind {
    Audio,
    Image,
    Webpage,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Screening {
    Clean,
    Flagged,
    Unchecked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalResource {
    pub url: String,
    pub media_kind: MediaKind,
    pub screening: Screening,
    pub locations: Vec<SourceLocation>,
}

fn without_holes(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            text::HOLE_OPEN => depth += 1,
            text::HOLE_CLOSE => {
                depth = depth.saturating_sub(1);
                out.push(' ');
            }
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

/// The literal, speakable part of an output: SSML and holes removed.
/// `None` for outputs that are entirely dynamic.
fn speakable(output: &OutputString) -> Option<String> {
    let t = strip_ssml(&without_holes(&output.text));
    t.chars().any(char::is_alphabetic).then_some(t)
}

/// One finding per output whose score reaches `threshold`. If the scorer
/// fails, the remaining outputs are reported unchecked in one diagnostic.
pub fn check_toxicity(
    outputs: &[OutputString],
    scorer: &dyn ToxicityScorer,
    threshold: f64,
) -> (Vec<Finding>, Vec<Diagnostic>) {
    let mut findings = Vec::new();
    let mut diagnostics = Vec::new();
    let candidates: Vec<(&OutputString, String)> = outputs.iter().filter_map(|o| speakable(o).map(|t| (o, t))).collect();
    for (i, (output, text)) in candidates.iter().enumerate() {
        match scorer.score(text) {
            Ok(score) if score.max() >= threshold => findings.push(
                Finding::new(
                    RuleId::ToxicContent,
                    DataSource::Output,
                    format!(
                        "Response contains toxic or profane language (toxicity {:.2}, profanity {:.2}).",
                        score.toxicity, score.profanity
                    ),
                    Evidence::at(output.location.clone(), &output.text),
                ),
            ),
            Ok(_) => {}
            Err(e) => {
                diagnostics.push(Diagnostic::warning(format!("{e}; {} outputs unchecked", candidates.len() - i)));
                break;
            }
        }
    }
    (findings, diagnostics)
}

fn plural_phrase(tokens: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty()
        && tokens.windows(phrase.len()).any(|w| {
            w.iter().zip(phrase).enumerate().all(|(k, (t, p))| {
                t == p || (k + 1 == phrase.len() && t.strip_suffix('s') == Some(p.as_str()))
            })
        })
}

/// The first sentence of `text` asking for a star rating.
pub fn rating_request(text: &str, rules: &ContentRules) -> Option<String> {
    let phrases: Vec<Vec<String>> = rules.star_phrases.iter().map(|p| words(p)).collect();
    split_sentences(&strip_ssml(text)).into_iter().find_map(|s| {
        let toks = words(&s.text);
        let star = phrases.iter().any(|p| plural_phrase(&toks, p));
        let verb = toks.iter().any(|t| rules.rating_verbs.iter().any(|v| is_inflection_of(t, v)));
        (star && verb).then_some(s.text)
    })
}

/// Outputs and the manifest description asking users for a specific star
/// rating.
pub fn check_rating_solicitation(outputs: &[OutputString], description: Option<&str>, rules: &ContentRules) -> Vec<Finding> {
    let mut out = Vec::new();
    for o in outputs {
        if let Some(sentence) = rating_request(&o.text, rules) {
            out.push(Finding::new(
                RuleId::RatingManipulation,
                DataSource::Output,
                format!("Response asks for a positive rating: \"{sentence}\""),
                Evidence::at(o.location.clone(), &o.text),
            ));
        }
    }
    if let Some(sentence) = description.and_then(|d| rating_request(d, rules)) {
        out.push(Finding::new(
            RuleId::RatingManipulation,
            DataSource::Description,
            format!("Skill description asks for a positive rating: \"{sentence}\""),
            Evidence::element("manifest description", &sentence),
        ));
    }
    out
}

fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"(?i)\bhttps?://[^\s"'<>`\\⟨⟩]+"#).unwrap())
}

pub fn media_kind(url: &str) -> MediaKind {
    let lower = url.to_ascii_lowercase();
    if !(lower.starts_with("http://") || lower.starts_with("https://")) {
        return MediaKind::Other;
    }
    let path = lower.split(['?', '#']).next().unwrap_or("");
    let ext = path.rsplit_once('.').map(|(_, e)| e).unwrap_or("");
    match ext {
        "mp3" | "wav" | "ogg" | "aac" | "m4a" | "flac" => MediaKind::Audio,
        "jpg" | "jpeg" | "png" | "gif" | "svg" | "webp" | "bmp" => MediaKind::Image,
        _ => MediaKind::Webpage,
    }
}

/// Absolute http(s) URLs in output strings, one resource per URL with
/// every location it appears at. Sorted by URL.
pub fn extract_external_resources(backend: &BackendModel) -> Vec<ExternalResource> {
    let mut map: BTreeMap<String, Vec<SourceLocation>> = BTreeMap::new();
    for o in &backend.outputs {
        for m in url_regex().find_iter(&o.text) {
            let url = m.as_str().trim_end_matches(['.', ',', ';', ':', '!', '?', ')', ']', '}']);
            // a bare scheme and host prefix cut off by a hole is still a site
            if url.len() <= "https://".len() {
                continue;
            }
            let locs = map.entry(url.to_string()).or_default();
            if !locs.contains(&o.location) {
                locs.push(o.location.clone());
            }
        }
    }
    map.into_iter()
        .map(|(url, mut locations)| {
            locations.sort();
            ExternalResource {
                media_kind: media_kind(&url),
                url,
                screening: Screening::Unchecked,
                locations,
            }
        })
        .collect()
}

/// Collaborators used to screen external resources.
pub struct Screeners<'a> {
    pub reputation: Option<&'a dyn ReputationClient>,
    pub fetcher: &'a dyn Fetcher,
    pub scorer: &'a dyn ToxicityScorer,
    pub threshold: f64,
    pub collection: &'a CollectionRules,
    pub keywords: &'a Keywords,
}

fn resource_evidence(r: &ExternalResource) -> Vec<Evidence> {
    let mut ev = vec![Evidence::element(format!("external resource {}", r.url), &r.url)];
    ev.extend(r.locations.iter().map(|l| Evidence::at(l.clone(), &r.url)));
    ev
}

fn with_all(mut f: Finding, rest: impl IntoIterator<Item = Evidence>) -> Finding {
    for e in rest {
        f = f.with_evidence(e);
    }
    f
}

fn screen_one(r: &ExternalResource, s: &Screeners<'_>) -> (Screening, Vec<Finding>, Vec<Diagnostic>) {
    let mut findings = Vec::new();
    let mut diagnostics = Vec::new();
    let mut unchecked: Vec<String> = Vec::new();
    let ev = resource_evidence(r);
    let first = ev[0].clone();

    match s.reputation.map(|c| c.check(&r.url)) {
        None => unchecked.push("no reputation source configured".into()),
        Some(Err(e)) => unchecked.push(format!("reputation lookup failed: {e}")),
        Some(Ok(Reputation::Clean)) => {}
        Some(Ok(Reputation::Flagged(reason))) => findings.push(with_all(
            Finding::new(
                RuleId::MaliciousResource,
                DataSource::Output,
                format!("External resource {} is flagged as malicious ({reason}).", r.url),
                first.clone(),
            ),
            ev[1..].iter().cloned(),
        )),
    }

    match r.media_kind {
        MediaKind::Webpage => match s.fetcher.fetch(&r.url) {
            FetchOutcome::Page(page) => {
                let text = if page.looks_like_html() {
                    html_visible_text(&page.body)
                } else {
                    page.body
                };
                match s.scorer.score(&text) {
                    Ok(score) if score.max() >= s.threshold => findings.push(with_all(
                        Finding::new(
                            RuleId::ToxicContent,
                            DataSource::Output,
                            format!("Content fetched from {} contains toxic or profane language.", r.url),
                            first.clone(),
                        )
                        .with_sub_rule("external-content"),
                        ev[1..].iter().cloned(),
                    )),
                    Ok(_) => {}
                    Err(e) => unchecked.push(e.to_string()),
                }
                let mut seen: Vec<DataCategory> = Vec::new();
                for req in detect_requests_in_text(&text, s.collection, s.keywords) {
                    if seen.contains(&req.data_category) {
                        continue;
                    }
                    seen.push(req.data_category.clone());
                    findings.push(with_all(
                        Finding::new(
                            RuleId::ExternalCollectionRequest,
                            DataSource::Output,
                            format!("Content fetched from {} asks for {}: \"{}\"", r.url, req.data_category, req.sentence),
                            Evidence::element(format!("external resource {}", r.url), &req.sentence),
                        )
                        .with_categories([req.data_category.clone()])
                        .with_confidence(req.confidence),
                        ev[1..].iter().cloned(),
                    ));
                }
            }
            FetchOutcome::HttpStatus(code) => unchecked.push(format!("fetch returned HTTP {code}")),
            FetchOutcome::Failed(e) => unchecked.push(format!("fetch failed: {e}")),
            FetchOutcome::Unavailable => unchecked.push("content not in the page cache (offline)".into()),
        },
        MediaKind::Audio | MediaKind::Image => unchecked.push("audio and image content is not transcribed".into()),
        MediaKind::Other => unchecked.push("unsupported URL".into()),
    }

    let screening = if !findings.is_empty() {
        Screening::Flagged
    } else if unchecked.is_empty() {
        Screening::Clean
    } else {
        Screening::Unchecked
    };
    if !unchecked.is_empty() {
        diagnostics.push(Diagnostic::info(format!("external resource {} partly unchecked: {}", r.url, unchecked.join("; "))));
    }
    (screening, findings, diagnostics)
}

/// Screens every resource (reputation, then fetched text through the
/// toxicity and collection-request detectors) with at most
/// [`MAX_IN_FLIGHT`] lookups at once. Updates each resource's screening
/// state; results are in resource (URL) order.
pub fn screen_external_resources(resources: &mut [ExternalResource], screeners: &Screeners<'_>) -> (Vec<Finding>, Vec<Diagnostic>) {
    let run = |rs: &[ExternalResource]| -> Vec<(Screening, Vec<Finding>, Vec<Diagnostic>)> {
        rs.par_iter().map(|r| screen_one(r, screeners)).collect()
    };
    let results = match rayon::ThreadPoolBuilder::new().num_threads(MAX_IN_FLIGHT).build() {
        Ok(pool) => pool.install(|| run(resources)),
        Err(_) => resources.iter().map(|r| screen_one(r, screeners)).collect(),
    };
    let mut findings = Vec::new();
    let mut diagnostics = Vec::new();
    for (r, (screening, f, d)) in resources.iter_mut().zip(results) {
        r.screening = screening;
        findings.extend(f);
        diagnostics.extend(d);
    }
    (findings, diagnostics)
}

fn has_marker(category: Option<&str>, markers: &[String]) -> bool {
    category.is_some_and(|c| {
        let c = c.to_lowercase();
        markers.iter().any(|m| c.contains(&m.to_lowercase()))
    })
}

pub fn is_kids_skill(manifest: &Manifest, rules: &ContentRules) -> bool {
    manifest.child_directed || has_marker(manifest.category.as_deref(), &rules.kids_category_markers)
}

pub fn is_health_skill(manifest: &Manifest, rules: &ContentRules) -> bool {
    has_marker(manifest.category.as_deref(), &rules.health_category_markers)
}

fn practice_source(kind: PracticeKind) -> DataSource {
    match kind {
        PracticeKind::PermissionDeclared | PracticeKind::PermissionUsed => DataSource::Permission,
        PracticeKind::DbStore => DataSource::Database,
        PracticeKind::ConversationalRequest | PracticeKind::CollectionSlot => DataSource::Output,
    }
}

/// Kids and Health category rules.
///
/// Kids skills must not ask for or otherwise collect personal data (any
/// request counts, whether or not a slot absorbs the reply) and must not
/// use external webpages. Health skills need a disclaimer in the
/// description.
pub fn check_category_rules(
    manifest: Option<&Manifest>,
    requests: &[CollectionRequest],
    practices: &[DataPractice],
    resources: &[ExternalResource],
    rules: &ContentRules,
) -> Vec<Finding> {
    let Some(manifest) = manifest else { return Vec::new() };
    let mut out = Vec::new();
    if is_kids_skill(manifest, rules) {
        let mut by_cat: BTreeMap<DataCategory, (DataSource, Vec<Evidence>)> = BTreeMap::new();
        for r in requests {
            let e = by_cat.entry(r.data_category.clone()).or_insert((DataSource::Output, Vec::new()));
            e.0 = DataSource::Output;
            e.1.push(Evidence::at(r.output.location.clone(), &r.sentence));
        }
        for p in practices.iter().filter(|p| p.kind.is_collection() && !p.data_category.is_unknown()) {
            let e = by_cat
                .entry(p.data_category.clone())
                .or_insert((practice_source(p.kind), Vec::new()));
            e.1.push(p.evidence.clone());
        }
        for (cat, (source, mut evidence)) in by_cat {
            evidence.sort();
            evidence.dedup();
            let mut it = evidence.into_iter();
            let first = it.next().expect("at least one evidence per category");
            out.push(
                with_all(
                    Finding::new(
                        RuleId::KidsDataCollection,
                        source,
                        format!("Kids skill collects personal data ({cat})."),
                        first,
                    ),
                    it,
                )
                .with_categories([cat]),
            );
        }
        for r in resources.iter().filter(|r| r.media_kind == MediaKind::Webpage) {
            let ev = resource_evidence(r);
            out.push(with_all(
                Finding::new(
                    RuleId::KidsExternalWebsite,
                    DataSource::Output,
                    format!("Kids skill uses the external website {}.", r.url),
                    ev[0].clone(),
                ),
                ev[1..].iter().cloned(),
            ));
        }
    }
    if is_health_skill(manifest, rules) {
        let description = manifest.description.as_deref().unwrap_or("");
        let lower = description.to_lowercase();
        if !rules.health_disclaimers.iter().any(|d| lower.contains(&d.to_lowercase())) {
            out.push(Finding::new(
                RuleId::HealthMissingDisclaimer,
                DataSource::Description,
                "Health skill description lacks a disclaimer that it is not a substitute for professional medical advice.",
                Evidence::element("manifest description", description),
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::Scope;
    use crate::fetch::{seed_cache, CachedFetcher, NoFetch};
    use crate::rules::RuleSet;

    fn output(text: &str, line: usize) -> OutputString {
        OutputString {
            text: text.to_string(),
            holes: Vec::new(),
            location: SourceLocation::new("index.js", line, 1),
            handler: None,
            scope: Scope { unit: 0, handler: None },
        }
    }

    fn backend(texts: &[&str]) -> BackendModel {
        BackendModel {
            outputs: texts.iter().enumerate().map(|(i, t)| output(t, i + 1)).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn toxicity_with_lexicon() {
        let lex = LexiconScorer::bundled();
        let outs = [output("you f*cked up! you f*cked up!", 1), output("Welcome to cake walk", 2), output("⟨x⟩", 3)];
        let (f, d) = check_toxicity(&outs, &lex, 0.9);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].evidence[0].location.as_ref().unwrap().line, 1);
        assert!(d.is_empty());
    }

    struct Broken;
    impl ToxicityScorer for Broken {
        fn score(&self, _: &str) -> Result<ToxicityScore, ScorerUnavailable> {
            Err(ScorerUnavailable("connection refused".into()))
        }
    }

    #[test]
    fn unavailable_scorer_is_diagnosed() {
        let (f, d) = check_toxicity(&[output("hello", 1), output("bye", 2)], &Broken, 0.9);
        assert!(f.is_empty());
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("2 outputs unchecked"));
    }

    #[test]
    fn rating_solicitation() {
        let rules = RuleSet::default().content;
        assert!(rating_request("please give this skill five star and write your valuable feedback", &rules).is_some());
        assert!(rating_request("If you like this skill, please give us a 5 star rating.", &rules).is_some());
        assert!(rating_request("PLEASE   Leave a five-star review!", &rules).is_some());
        assert!(rating_request("This skill earned five stars from critics", &rules).is_none());
        assert!(rating_request("Rate this skill.", &rules).is_none());
        let f = check_rating_solicitation(
            &[output("Thanks! Please rate us 5 stars.", 1)],
            Some("please give this skill five star"),
            &rules,
        );
        let rows: Vec<_> = f.iter().map(|f| f.data_source).collect();
        assert_eq!(rows, [DataSource::Output, DataSource::Description]);
    }

    #[test]
    fn resources_by_kind_and_dedup() {
        let b = backend(&[
            "<audio src='https://cdn.example.com/sound.mp3'/>",
            "https://api.example.com/facts",
            "See https://api.example.com/facts.",
            "https://img.example.com/a.PNG?x=1",
            "https://api.example.com/users/⟨id⟩",
        ]);
        let r = extract_external_resources(&b);
        let got: Vec<_> = r.iter().map(|r| (r.url.as_str(), r.media_kind, r.locations.len())).collect();
        assert_eq!(
            got,
            [
                ("https://api.example.com/facts", MediaKind::Webpage, 2),
                ("https://api.example.com/users/", MediaKind::Webpage, 1),
                ("https://cdn.example.com/sound.mp3", MediaKind::Audio, 1),
                ("https://img.example.com/a.PNG?x=1", MediaKind::Image, 1),
            ]
        );
    }

    fn screeners<'a>(rules: &'a RuleSet, lex: &'a LexiconScorer, rep: Option<&'a dyn ReputationClient>, fetcher: &'a dyn Fetcher) -> Screeners<'a> {
        Screeners {
            reputation: rep,
            fetcher,
            scorer: lex,
            threshold: 0.9,
            collection: &rules.collection,
            keywords: &rules.keywords,
        }
    }

    #[test]
    fn offline_screening_is_unchecked() {
        let rules = RuleSet::default();
        let lex = LexiconScorer::bundled();
        let mut r = extract_external_resources(&backend(&["https://a.example/x", "https://b.example/y.mp3", "https://c.example/"]));
        let (f, d) = screen_external_resources(&mut r, &screeners(&rules, &lex, None, &NoFetch));
        assert!(f.is_empty());
        assert_eq!(d.len(), 3);
        assert!(r.iter().all(|r| r.screening == Screening::Unchecked));
    }

    #[test]
    fn denylist_and_fetched_page() {
        let rules = RuleSet::default();
        let lex = LexiconScorer::bundled();
        let deny = Denylist::parse("https://evil.example/payload\n");
        let dir = tempfile::tempdir().unwrap();
        seed_cache(dir.path(), "https://quiz.example/q", 200, "<p>Welcome! What is your name?</p>").unwrap();
        seed_cache(dir.path(), "https://evil.example/payload", 200, "<p>hello</p>").unwrap();
        let fetcher = CachedFetcher::offline(Some(dir.path().to_path_buf()));
        let mut r = extract_external_resources(&backend(&["https://evil.example/payload", "https://quiz.example/q"]));
        let (f, _) = screen_external_resources(&mut r, &screeners(&rules, &lex, Some(&deny), &fetcher));
        let ids: Vec<_> = f.iter().map(|f| f.rule_id.code()).collect();
        assert_eq!(ids, ["CONT-007", "CONT-008"]);
        assert_eq!(f[1].categories, [DataCategory::new("Name")]);
        assert_eq!(r[0].screening, Screening::Flagged);
        assert_eq!(r[1].screening, Screening::Flagged);
    }

    fn manifest(category: &str, description: &str) -> Manifest {
        crate::package::parse_manifest(&format!(
            r#"{{"manifest":{{"publishingInformation":{{"category":"{category}","locales":{{"en-US":{{"name":"x","description":"{description}"}}}}}}}}}}"#
        ))
        .unwrap()
        .0
    }

    #[test]
    fn kids_rules() {
        let rules = RuleSet::default();
        let outs = [output("Can you tell me your birthday?", 1)];
        let reqs = crate::collection::detect_collection_requests(&outs, &rules.collection, &rules.keywords);
        let res = extract_external_resources(&backend(&["https://games.example/play"]));
        let m = manifest("CHILDRENS_GAMES", "A game.");
        let f = check_category_rules(Some(&m), &reqs, &[], &res, &rules.content);
        let ids: Vec<_> = f.iter().map(|f| f.rule_id.code()).collect();
        assert_eq!(ids, ["CONT-004", "CONT-005"]);
        let adult = manifest("GAMES", "A game.");
        assert!(check_category_rules(Some(&adult), &reqs, &[], &res, &rules.content).is_empty());
    }

    #[test]
    fn health_disclaimer() {
        let rules = RuleSet::default();
        let m = manifest("HEALTH_AND_FITNESS", "Ask UCSD Health to save your spot at the nearest clinic");
        let f = check_category_rules(Some(&m), &[], &[], &[], &rules.content);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].rule_id, RuleId::HealthMissingDisclaimer);
        let m = manifest(
            "HEALTH_AND_FITNESS",
            "Ask UCSD Health to save your spot at the nearest clinic. For information purpose only.",
        );
        assert!(check_category_rules(Some(&m), &[], &[], &[], &rules.content).is_empty());
    }
}
