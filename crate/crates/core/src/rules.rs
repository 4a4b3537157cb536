//! Rule data: the keyword registry, invocation-name word lists, content
//! phrases and the back-end source/sink pattern registry.
//!
//! Defaults are compiled in from `rules/default.toml`. A user rules file is
//! merged on top: tables merge key by key, arrays replace.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::category::{Confidence, DataCategory};
use crate::error::{Error, Result};
use crate::text;

pub const DEFAULT_RULES: &str = include_str!("../rules/default.toml");
pub const DEFAULT_PROFANITY: &str = include_str!("../rules/profanity.txt");

/// Highest rules-file schema this build understands.
pub const SUPPORTED_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordEntry {
    pub keyword: String,
    pub category: DataCategory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeywordSection {
    Pii,
    BuiltinSlot,
    PermissionData,
    Health,
}

impl KeywordSection {
    pub const ALL: [KeywordSection; 4] = [
        KeywordSection::Pii,
        KeywordSection::BuiltinSlot,
        KeywordSection::PermissionData,
        KeywordSection::Health,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keywords {
    pub pii: Vec<KeywordEntry>,
    pub builtin_slot: Vec<KeywordEntry>,
    pub permission: Vec<KeywordEntry>,
    pub health: Vec<KeywordEntry>,
    #[serde(default)]
    pub aliases: Vec<KeywordEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonSentence {
    pub text: String,
    pub category: DataCategory,
    pub confidence: Confidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionRules {
    pub request_possessives: Vec<String>,
    pub utterance_possessives: Vec<String>,
    pub solicitation_verbs: Vec<String>,
    pub max_interleaving_adjectives: usize,
    pub fuzzy_threshold: f64,
    pub common_request_sentences: Vec<CommonSentence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRules {
    pub collect_verbs: Vec<String>,
    pub store_verbs: Vec<String>,
    /// Store verbs about removal; negating them does not deny retention.
    pub deletion_verbs: Vec<String>,
    pub negations: Vec<String>,
    pub negation_window: usize,
    pub relevance_terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocationRules {
    pub two_word_forbidden: Vec<String>,
    pub launch_phrases: Vec<String>,
    pub connecting_words: Vec<String>,
    pub wake_words: Vec<String>,
    pub common_names: Vec<String>,
    #[serde(default)]
    pub brand_whitelist: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentRules {
    pub toxicity_threshold: f64,
    pub star_phrases: Vec<String>,
    pub rating_verbs: Vec<String>,
    pub health_disclaimers: Vec<String>,
    pub kids_category_markers: Vec<String>,
    pub health_category_markers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodCategory {
    pub method: String,
    pub category: DataCategory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberCategory {
    pub path: String,
    pub category: DataCategory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointTemplate {
    pub template: String,
    pub category: DataCategory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestPermission {
    pub name: String,
    pub category: DataCategory,
}

/// Source and sink patterns recognized in back-end code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternRegistry {
    pub slot_path_markers: Vec<String>,
    pub slot_getters: Vec<String>,
    pub response_methods: Vec<String>,
    pub response_builders: Vec<String>,
    pub emit_response_events: Vec<String>,
    pub db_attribute_segments: Vec<String>,
    pub db_methods: Vec<String>,
    pub http_methods: Vec<String>,
    pub http_receivers: Vec<String>,
    pub permission_clients: Vec<MethodCategory>,
    pub permission_members: Vec<MemberCategory>,
    pub endpoint_prefixes: Vec<String>,
    pub endpoints: Vec<EndpointTemplate>,
    pub manifest_permissions: Vec<ManifestPermission>,
}

impl PatternRegistry {
    pub fn permission_client_category(&self, method: &str) -> Option<&DataCategory> {
        self.permission_clients
            .iter()
            .find(|m| m.method == method)
            .map(|m| &m.category)
    }

    pub fn manifest_permission_category(&self, name: &str) -> Option<&DataCategory> {
        self.manifest_permissions
            .iter()
            .find(|p| p.name.eq_ignore_ascii_case(name))
            .map(|p| &p.category)
    }

    /// True when `text` mentions one of the permission endpoint prefixes.
    pub fn mentions_endpoint(&self, text: &str) -> bool {
        self.endpoint_prefixes.iter().any(|p| text.contains(p.as_str()))
    }

    /// Category for an endpoint string. Interpolation holes and `{...}`
    /// placeholders count as a single path segment. The longest matching
    /// template wins; a recognized prefix with no matching template yields
    /// `Unknown`.
    pub fn endpoint_category(&self, text: &str) -> Option<DataCategory> {
        if !self.mentions_endpoint(text) {
            return None;
        }
        let normalized = normalize_endpoint(text);
        let mut best: Option<(usize, &DataCategory)> = None;
        for ep in &self.endpoints {
            let pattern = normalize_endpoint(&ep.template);
            if segment_match(&normalized, &pattern) {
                let len = pattern.len();
                if best.is_none_or(|(l, _)| len > l) {
                    best = Some((len, &ep.category));
                }
            }
        }
        Some(best.map(|(_, c)| c.clone()).unwrap_or_else(DataCategory::unknown))
    }
}

fn normalize_endpoint(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '{' | text::HOLE_OPEN => {
                if depth == 0 {
                    out.push('*');
                }
                depth += 1;
            }
            '}' | text::HOLE_CLOSE => depth = depth.saturating_sub(1),
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out.replace("~ current", "~current")
}

/// Does `pattern` (with `*` segment wildcards) occur in `text`, ending at a
/// segment boundary?
fn segment_match(text: &str, pattern: &str) -> bool {
    let tsegs: Vec<&str> = text.split('/').collect();
    let psegs: Vec<&str> = pattern.split('/').collect();
    if psegs.len() > tsegs.len() {
        return false;
    }
    'outer: for start in 0..=tsegs.len() - psegs.len() {
        for (k, p) in psegs.iter().enumerate() {
            let t = tsegs[start + k];
            let first = k == 0;
            let last = k + 1 == psegs.len();
            let ok = if *p == "*" {
                !t.is_empty()
            } else if first && last {
                t.contains(p)
            } else if first {
                t.ends_with(p)
            } else if last {
                // allow trailing query strings or quotes
                t == *p || t.starts_with(&format!("{p}?")) || t.starts_with(&format!("{p}\""))
            } else {
                t == *p
            };
            if !ok {
                continue 'outer;
            }
        }
        return true;
    }
    false
}

/// The full rule set, versioned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub schema_version: u32,
    pub rules_version: String,
    pub keywords: Keywords,
    pub collection: CollectionRules,
    pub policy: PolicyRules,
    pub invocation: InvocationRules,
    pub content: ContentRules,
    pub patterns: PatternRegistry,
}

impl Default for RuleSet {
    fn default() -> Self {
        let value: toml::Value = toml::from_str(DEFAULT_RULES).expect("bundled rules parse");
        value.try_into().expect("bundled rules match schema")
    }
}

impl RuleSet {
    /// Defaults merged with the rules file at `path`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Rules(format!("{}: {e}", path.display())))?;
        Self::with_overrides(&text)
    }

    pub fn with_overrides(text: &str) -> Result<Self> {
        let mut base: toml::Value = toml::from_str(DEFAULT_RULES).expect("bundled rules parse");
        let overrides: toml::Value = toml::from_str(text).map_err(|e| Error::Rules(e.to_string()))?;
        merge(&mut base, overrides);
        let rules: RuleSet = base.try_into().map_err(|e: toml::de::Error| Error::Rules(e.to_string()))?;
        if rules.schema_version > SUPPORTED_SCHEMA {
            return Err(Error::Rules(format!(
                "rules schema {} is newer than supported schema {SUPPORTED_SCHEMA}",
                rules.schema_version
            )));
        }
        rules.validate()?;
        Ok(rules)
    }

    fn validate(&self) -> Result<()> {
        for section in KeywordSection::ALL {
            if self.keywords.section(section).is_empty() {
                return Err(Error::Rules(format!("keyword section {section:?} is empty")));
            }
        }
        if self.policy.collect_verbs.is_empty() || self.policy.store_verbs.is_empty() {
            return Err(Error::Rules("policy verb lists must be nonempty".into()));
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(existing) => merge(existing, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl Keywords {
    pub fn section(&self, section: KeywordSection) -> &[KeywordEntry] {
        match section {
            KeywordSection::Pii => &self.pii,
            KeywordSection::BuiltinSlot => &self.builtin_slot,
            KeywordSection::PermissionData => &self.permission,
            KeywordSection::Health => &self.health,
        }
    }

    /// Every (section, entry) pair, in registry order.
    pub fn entries(&self) -> impl Iterator<Item = (KeywordSection, &KeywordEntry)> {
        KeywordSection::ALL
            .into_iter()
            .flat_map(move |s| self.section(s).iter().map(move |e| (s, e)))
    }

    /// Canonical category names known to the registry.
    pub fn categories(&self) -> BTreeMap<DataCategory, ()> {
        self.entries()
            .map(|(_, e)| (e.category.clone(), ()))
            .chain(self.aliases.iter().map(|e| (e.category.clone(), ())))
            .collect()
    }

    /// Word-token forms of each keyword used for free-text matching,
    /// including aliases and the canonical category name itself.
    /// Longer phrases come first so the longest match wins.
    pub fn text_forms(&self) -> Vec<(Vec<String>, DataCategory)> {
        let mut forms: Vec<(Vec<String>, DataCategory)> = Vec::new();
        let mut push = |tokens: Vec<String>, cat: &DataCategory| {
            if !tokens.is_empty() && !forms.iter().any(|(t, c)| *t == tokens && c == cat) {
                forms.push((tokens, cat.clone()));
            }
        };
        for entry in self.pii.iter().chain(self.health.iter()).chain(self.aliases.iter()) {
            push(text::words(&entry.keyword.replace('_', " ")), &entry.category);
        }
        // permission and slot-type names are identifiers ("Given_name",
        // "PhoneNumber"); split them into words.
        for entry in self.permission.iter().chain(self.builtin_slot.iter()) {
            push(text::split_identifier(&entry.keyword), &entry.category);
        }
        forms.sort_by_key(|f| std::cmp::Reverse(f.0.len()));
        forms
    }

    /// Text forms for one category (used by the policy completeness check).
    pub fn forms_for(&self, category: &DataCategory) -> Vec<Vec<String>> {
        let mut forms: Vec<Vec<String>> = self
            .text_forms()
            .into_iter()
            .filter(|(_, c)| c == category)
            .map(|(t, _)| t)
            .collect();
        let canonical = text::split_identifier(category.as_str());
        if !forms.contains(&canonical) {
            forms.push(canonical);
        }
        forms
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_rules_mirror_keyword_table_sizes() {
        let rules = RuleSet::default();
        assert_eq!(rules.keywords.pii.len(), 24);
        assert_eq!(rules.keywords.builtin_slot.len(), 15);
        assert_eq!(rules.keywords.permission.len(), 7);
        assert_eq!(rules.keywords.health.len(), 14);
        assert_eq!(rules.schema_version, 1);
    }

    #[test]
    fn bundled_verb_lists() {
        let rules = RuleSet::default();
        assert_eq!(
            rules.policy.collect_verbs,
            ["collect", "ask", "access", "request", "gather", "obtain", "receive", "share", "provide", "enter"]
        );
        assert_eq!(
            rules.policy.store_verbs,
            ["store", "keep", "retain", "save", "cache", "delete", "erase", "remove"]
        );
    }

    #[test]
    fn overrides_merge_tables_and_replace_arrays() {
        let rules = RuleSet::with_overrides(
            r#"
            [invocation]
            brand_whitelist = ["jokes"]
            "#,
        )
        .unwrap();
        assert_eq!(rules.invocation.brand_whitelist, ["jokes"]);
        assert_eq!(rules.invocation.wake_words.len(), 5);
    }

    #[test]
    fn newer_schema_rejected() {
        assert!(RuleSet::with_overrides("schema_version = 99").is_err());
    }

    #[test]
    fn endpoint_categories() {
        let p = RuleSet::default().patterns;
        let cat = |s: &str| p.endpoint_category(s).map(|c| c.as_str().to_string());
        assert_eq!(cat("/v2/accounts/~current/settings/Profile.name").as_deref(), Some("Name"));
        assert_eq!(cat("/v2/accounts/~current/settings/Profile.email").as_deref(), Some("Email"));
        assert_eq!(cat("/v2/persons/~current/profile/mobileNumber").as_deref(), Some("PhoneNumber"));
        assert_eq!(cat("/v1/devices/⟨deviceId⟩/settings/address").as_deref(), Some("Address"));
        assert_eq!(
            cat("https://api.amazonalexa.com/v1/devices/{deviceId}/settings/address/countryAndPostalCode").as_deref(),
            Some("PostalCode")
        );
        assert_eq!(cat("/v1/devices/").as_deref(), Some("Unknown"));
        assert_eq!(cat("/v3/other"), None);
    }
}
