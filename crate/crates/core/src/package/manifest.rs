use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diagnostic::Diagnostic;
use crate::error::{Error, Result};

/// Developer's answer to the platform's "does this skill collect personal
/// information?" question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PersonalInfoAnswer {
    Yes,
    No,
    Unanswered,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub skill_name: String,
    pub category: Option<String>,
    pub description: Option<String>,
    /// Privacy policy URL keyed by locale. Empty URLs are not recorded.
    pub privacy_policy_url: BTreeMap<String, String>,
    /// Declared permission names, deduplicated, declaration order kept.
    pub permissions: Vec<String>,
    pub collects_personal_info: PersonalInfoAnswer,
    /// Whether the manifest carries a privacy-and-compliance section at all.
    pub has_privacy_section: bool,
    /// `privacyAndCompliance.isChildDirected`.
    pub child_directed: bool,
}

impl Manifest {
    /// The policy URL of the preferred locale (en-US, then en-*, then any).
    pub fn privacy_policy(&self) -> Option<&str> {
        pick_locale(self.privacy_policy_url.keys().map(String::as_str))
            .and_then(|loc| self.privacy_policy_url.get(loc))
            .map(String::as_str)
    }
}

/// Locale preference used for manifests and interaction models.
pub(crate) fn pick_locale<'a>(locales: impl Iterator<Item = &'a str>) -> Option<&'a str> {
    let mut all: Vec<&str> = locales.collect();
    all.sort();
    all.iter()
        .find(|l| l.eq_ignore_ascii_case("en-US"))
        .or_else(|| all.iter().find(|l| l.to_ascii_lowercase().starts_with("en-")))
        .or_else(|| all.first())
        .copied()
}

pub(crate) fn locale_rank(locale: &str) -> u8 {
    if locale.eq_ignore_ascii_case("en-US") {
        0
    } else if locale.to_ascii_lowercase().starts_with("en-") {
        1
    } else {
        2
    }
}

fn str_at<'a>(v: &'a Value, key: &str) -> Option<&'a str> {
    v.get(key).and_then(Value::as_str).map(str::trim).filter(|s| !s.is_empty())
}

/// Parses a platform manifest (`skill.json`). Unknown fields are ignored.
pub fn parse_manifest(text: &str) -> Result<(Manifest, Vec<Diagnostic>)> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::MalformedManifest(e.to_string()))?;
    if !root.is_object() {
        return Err(Error::MalformedManifest("top level is not an object".into()));
    }
    let body = root.get("manifest").filter(|m| m.is_object()).unwrap_or(&root);
    let mut diagnostics = Vec::new();

    let publishing = body.get("publishingInformation");
    let locales = publishing.and_then(|p| p.get("locales")).and_then(Value::as_object);
    let locale_block = locales.and_then(|m| pick_locale(m.keys().map(String::as_str)).and_then(|k| m.get(k)));

    let skill_name = locale_block
        .and_then(|b| str_at(b, "name"))
        .or_else(|| str_at(body, "name"))
        .unwrap_or_default()
        .to_string();
    let description = locale_block
        .and_then(|b| str_at(b, "description").or_else(|| str_at(b, "summary")))
        .or_else(|| str_at(body, "description"))
        .map(str::to_string);
    let category = publishing
        .and_then(|p| str_at(p, "category"))
        .or_else(|| str_at(body, "category"))
        .map(str::to_string);

    let mut permissions: Vec<String> = Vec::new();
    if let Some(list) = body.get("permissions").and_then(Value::as_array) {
        for p in list {
            let name = p.as_str().or_else(|| str_at(p, "name")).map(str::trim).unwrap_or("");
            if !name.is_empty() && !permissions.iter().any(|x| x == name) {
                permissions.push(name.to_string());
            }
        }
    }

    let privacy = body.get("privacyAndCompliance").filter(|v| v.is_object());
    let mut privacy_policy_url = BTreeMap::new();
    let mut collects_personal_info = PersonalInfoAnswer::Unanswered;
    match privacy {
        None => diagnostics.push(Diagnostic::warning(
            "privacy section missing: manifest has no privacyAndCompliance attribute",
        )),
        Some(section) => {
            if let Some(locales) = section.get("locales").and_then(Value::as_object) {
                for (loc, block) in locales {
                    if let Some(url) = str_at(block, "privacyPolicyUrl") {
                        privacy_policy_url.insert(loc.clone(), url.to_string());
                    }
                }
            }
            collects_personal_info = match section.get("usesPersonalInfo") {
                Some(Value::Bool(true)) => PersonalInfoAnswer::Yes,
                Some(Value::Bool(false)) => PersonalInfoAnswer::No,
                Some(Value::String(s)) if s.eq_ignore_ascii_case("true") || s.eq_ignore_ascii_case("yes") => {
                    PersonalInfoAnswer::Yes
                }
                Some(Value::String(s)) if s.eq_ignore_ascii_case("false") || s.eq_ignore_ascii_case("no") => {
                    PersonalInfoAnswer::No
                }
                _ => PersonalInfoAnswer::Unanswered,
            };
        }
    }

    Ok((
        Manifest {
            skill_name,
            category,
            description,
            privacy_policy_url,
            permissions,
            collects_personal_info,
            has_privacy_section: privacy.is_some(),
            child_directed: privacy
                .and_then(|p| p.get("isChildDirected"))
                .is_some_and(|v| v.as_bool() == Some(true) || v.as_str().is_some_and(|s| s.eq_ignore_ascii_case("true"))),
        },
        diagnostics,
    ))
}
