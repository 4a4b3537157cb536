use serde::{Deserialize, Serialize};

use super::{placeholders, InteractionModel, Slot, BUILTIN_PREFIX};
use crate::category::DataCategory;
use crate::rules::{KeywordSection, Keywords};
use crate::text::{split_identifier, words};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchSite {
    SlotName,
    SlotType,
    Utterance,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitivityLabel {
    pub section: KeywordSection,
    pub category: DataCategory,
    /// The registry entry that matched, as spelled in the registry.
    pub matched_keyword: String,
    pub match_site: MatchSite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitiveSlot {
    pub intent: String,
    pub slot: Slot,
    pub label: SensitivityLabel,
}

fn strip_builtin(slot_type: &str) -> &str {
    if slot_type.len() > BUILTIN_PREFIX.len() && slot_type[..BUILTIN_PREFIX.len()].eq_ignore_ascii_case(BUILTIN_PREFIX) {
        &slot_type[BUILTIN_PREFIX.len()..]
    } else {
        slot_type
    }
}

fn singular(word: &str) -> &str {
    if word.len() > 3 && word.ends_with('s') && !word.ends_with("ss") {
        &word[..word.len() - 1]
    } else {
        word
    }
}

/// Does `phrase` occur as a contiguous run in `tokens` (plural-tolerant)?
fn contains_run(tokens: &[String], phrase: &[String]) -> bool {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return false;
    }
    tokens.windows(phrase.len()).any(|w| {
        w.iter()
            .zip(phrase)
            .all(|(t, p)| t == p || singular(t) == p.as_str())
    })
}

/// Keyword token runs, longest first, registry order among equals.
fn identifier_forms(keywords: &Keywords) -> Vec<(Vec<String>, KeywordSection, &crate::rules::KeywordEntry)> {
    let mut forms: Vec<_> = keywords
        .entries()
        .map(|(section, entry)| (split_identifier(&entry.keyword), section, entry))
        .filter(|(t, _, _)| !t.is_empty())
        .collect();
    forms.sort_by_key(|f| std::cmp::Reverse(f.0.len()));
    forms
}

fn label_for(slot: &Slot, forms: &[(Vec<String>, KeywordSection, &crate::rules::KeywordEntry)], keywords: &Keywords) -> Option<SensitivityLabel> {
    let bare_type = strip_builtin(&slot.slot_type);
    if let Some(entry) = keywords
        .builtin_slot
        .iter()
        .find(|e| e.keyword.eq_ignore_ascii_case(bare_type))
    {
        return Some(SensitivityLabel {
            section: KeywordSection::BuiltinSlot,
            category: entry.category.clone(),
            matched_keyword: entry.keyword.clone(),
            match_site: MatchSite::SlotType,
        });
    }
    let sites = [
        (split_identifier(bare_type), MatchSite::SlotType),
        (split_identifier(&slot.name), MatchSite::SlotName),
    ];
    for (tokens, site) in sites {
        if let Some((_, section, entry)) = forms.iter().find(|(phrase, _, _)| contains_run(&tokens, phrase)) {
            return Some(SensitivityLabel {
                section: *section,
                category: entry.category.clone(),
                matched_keyword: entry.keyword.clone(),
                match_site: site,
            });
        }
    }
    None
}

/// Slots whose name or type contains a registry keyword. Names and types are
/// split at camelCase / snake_case boundaries and matched word-wise, so
/// "userName" matches "name" but "page" does not match "age".
pub fn classify_sensitive_slots(model: &InteractionModel, keywords: &Keywords) -> Vec<SensitiveSlot> {
    let forms = identifier_forms(keywords);
    model
        .slots()
        .filter_map(|(intent, slot)| {
            label_for(slot, &forms, keywords).map(|label| SensitiveSlot {
                intent: intent.name.clone(),
                slot: slot.clone(),
                label,
            })
        })
        .collect()
}

/// Classifies a bare identifier (a slot name seen only in back-end code).
pub fn classify_identifier(name: &str, keywords: &Keywords) -> Option<SensitivityLabel> {
    let forms = identifier_forms(keywords);
    let slot = Slot {
        name: name.to_string(),
        slot_type: String::new(),
        utterances_referencing: 0,
    };
    label_for(&slot, &forms, keywords)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionUtterance {
    pub intent: String,
    pub utterance: String,
    pub slot: String,
    pub category: DataCategory,
}

/// Sample utterances that can absorb a reply carrying personal data: a
/// possessive marker ("my", "our") before a sensitive-slot placeholder, or
/// an utterance that is only the placeholder.
pub fn classify_collection_utterances(
    model: &InteractionModel,
    sensitive: &[SensitiveSlot],
    possessives: &[String],
) -> Vec<CollectionUtterance> {
    let mut out = Vec::new();
    for intent in &model.intents {
        for utterance in &intent.sample_utterances {
            for placeholder in placeholders(utterance) {
                let Some(s) = sensitive.iter().find(|s| s.intent == intent.name && s.slot.name == placeholder) else {
                    continue;
                };
                let bare = utterance.trim().trim_start_matches('{').trim_end_matches('}').trim() == placeholder
                    && utterance.trim().starts_with('{');
                let pos = utterance.find(&format!("{{{placeholder}}}")).unwrap_or_else(|| {
                    utterance.find('{').unwrap_or(0)
                });
                let before = words(&utterance[..pos]);
                let possessive = before.iter().any(|w| possessives.iter().any(|p| p == w));
                if (bare || possessive) && !out.iter().any(|c: &CollectionUtterance| c.intent == intent.name && c.utterance == *utterance && c.slot == placeholder) {
                    out.push(CollectionUtterance {
                        intent: intent.name.clone(),
                        utterance: utterance.clone(),
                        slot: placeholder.to_string(),
                        category: s.label.category.clone(),
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::RuleSet;

    fn model(slots: &[(&str, &str)], samples: &[&str]) -> InteractionModel {
        let slots_json: Vec<String> = slots
            .iter()
            .map(|(n, t)| format!(r#"{{"name":"{n}","type":"{t}"}}"#))
            .collect();
        let samples_json: Vec<String> = samples.iter().map(|s| format!("\"{s}\"")).collect();
        let text = format!(
            r#"{{"intents":[{{"name":"I","slots":[{}],"samples":[{}]}}]}}"#,
            slots_json.join(","),
            samples_json.join(",")
        );
        InteractionModel::parse(&text).unwrap().0
    }

    #[test]
    fn builtin_first_name_slot() {
        let rules = RuleSet::default();
        let s = classify_sensitive_slots(&model(&[("name", "AMAZON.FirstName")], &[]), &rules.keywords);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].label.section, KeywordSection::BuiltinSlot);
        assert_eq!(s[0].label.matched_keyword, "FirstName");
        assert_eq!(s[0].label.category.as_str(), "Name");
    }

    #[test]
    fn us_city_slot() {
        let rules = RuleSet::default();
        let s = classify_sensitive_slots(&model(&[("city", "AMAZON.US_City")], &[]), &rules.keywords);
        assert_eq!(s[0].label.matched_keyword, "US_City");
    }

    #[test]
    fn number_slot_not_sensitive() {
        let rules = RuleSet::default();
        assert!(classify_sensitive_slots(&model(&[("answer", "AMAZON.NUMBER")], &[]), &rules.keywords).is_empty());
    }

    #[test]
    fn word_boundaries_on_slot_names() {
        let rules = RuleSet::default();
        let s = classify_sensitive_slots(
            &model(&[("userName", "CUSTOM"), ("page", "CUSTOM"), ("phone_number", "CUSTOM")], &[]),
            &rules.keywords,
        );
        let names: Vec<_> = s.iter().map(|s| s.slot.name.as_str()).collect();
        assert_eq!(names, ["userName", "phone_number"]);
        assert_eq!(s[1].label.category.as_str(), "PhoneNumber");
        assert_eq!(s[0].label.match_site, MatchSite::SlotName);
    }

    #[test]
    fn collection_utterance_shapes() {
        let rules = RuleSet::default();
        let m = model(
            &[("name", "AMAZON.FirstName"), ("city", "AMAZON.US_City")],
            &["my name is {name}", "{name}", "what is the weather in {city}", "our city is {city}"],
        );
        let sensitive = classify_sensitive_slots(&m, &rules.keywords);
        let got = classify_collection_utterances(&m, &sensitive, &rules.collection.utterance_possessives);
        let utterances: Vec<_> = got.iter().map(|c| c.utterance.as_str()).collect();
        assert_eq!(utterances, ["my name is {name}", "{name}", "our city is {city}"]);
    }
}
