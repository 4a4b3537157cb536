//! Finding taxonomy: stable rule identifiers, severities and the evidence
//! attached to each reported problem.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::category::{Confidence, DataCategory};
use crate::diagnostic::SourceLocation;
use crate::text::truncate_chars;

pub const MAX_EXCERPT_CHARS: usize = 200;

/// Ordered most severe first, so sorting findings puts violations on top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Severity {
    Violation,
    Vulnerability,
    Bug,
    Advisory,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Violation => "violation",
            Severity::Vulnerability => "vulnerability",
            Severity::Bug => "bug",
            Severity::Advisory => "advisory",
        }
    }

    /// True when `self` is at least as severe as `threshold`.
    pub fn at_least(self, threshold: Severity) -> bool {
        self <= threshold
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which part of the skill the evidence comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    Output,
    Permission,
    Database,
    Disclosure,
    Description,
    InvocationName,
    Intent,
    Slot,
}

impl DataSource {
    pub fn as_str(self) -> &'static str {
        match self {
            DataSource::Output => "output",
            DataSource::Permission => "permission",
            DataSource::Database => "database",
            DataSource::Disclosure => "disclosure",
            DataSource::Description => "description",
            DataSource::InvocationName => "invocation-name",
            DataSource::Intent => "intent",
            DataSource::Slot => "slot",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleGroup {
    Privacy,
    Content,
    Consistency,
    Flow,
}

impl RuleGroup {
    pub fn title(self) -> &'static str {
        match self {
            RuleGroup::Privacy => "Privacy violations",
            RuleGroup::Content => "Violations of content guidelines",
            RuleGroup::Consistency => "Code inconsistency",
            RuleGroup::Flow => "Data-flow notes",
        }
    }
}

macro_rules! rules {
    ($( $variant:ident => $code:literal, $slug:literal, $group:ident, $sev:ident, $problem:literal, $fix:literal; )*) => {
        /// Stable rule identifier. Serialized as its code (`PRIV-001`).
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum RuleId {
            $($variant,)*
        }

        impl RuleId {
            pub const ALL: &'static [RuleId] = &[$(RuleId::$variant,)*];

            pub fn code(self) -> &'static str {
                match self { $(RuleId::$variant => $code,)* }
            }

            pub fn slug(self) -> &'static str {
                match self { $(RuleId::$variant => $slug,)* }
            }

            pub fn group(self) -> RuleGroup {
                match self { $(RuleId::$variant => RuleGroup::$group,)* }
            }

            pub fn default_severity(self) -> Severity {
                match self { $(RuleId::$variant => Severity::$sev,)* }
            }

            /// Short problem statement, as used in the aggregate table.
            pub fn problem(self) -> &'static str {
                match self { $(RuleId::$variant => $problem,)* }
            }

            pub fn remediation(self) -> &'static str {
                match self { $(RuleId::$variant => $fix,)* }
            }
        }
    };
}

rules! {
    MissingPrivacyPolicy => "PRIV-001", "missing-privacy-policy", Privacy, Violation,
        "Data collection/storage but missing a privacy policy",
        "Add a privacyPolicyUrl for every locale in the manifest that links to a policy covering the collected data.";
    IncompletePrivacyPolicy => "PRIV-002", "incomplete-privacy-policy", Privacy, Violation,
        "Data collection/storage but having an incomplete privacy policy",
        "State in the privacy policy which data is collected and stored, using the data names in the same sentence as the practice.";
    OverPrivilegedPermission => "PRIV-003", "over-privileged-permission", Privacy, Violation,
        "Over-privileged data requests",
        "Remove the permission from the manifest or use the retrieved value.";
    UndeclaredPermissionUse => "PRIV-004", "undeclared-permission-use", Privacy, Bug,
        "Not-asked permission usage",
        "Declare the permission in the manifest before reading the data.";
    FalseDisclosure => "PRIV-005", "false-disclosure", Privacy, Violation,
        "Incorrect data collection disclosure to the platform",
        "Answer 'yes' to the personal-information question (usesPersonalInfo) in the manifest.";
    DeceptivePolicy => "PRIV-006", "deceptive-policy", Privacy, Violation,
        "Privacy policy denies retention of stored data",
        "Correct the privacy policy to describe the data the skill stores.";
    UndisclosedToPlatform => "PRIV-007", "undisclosed-to-platform", Privacy, Advisory,
        "Data collection not disclosed to the platform",
        "Answer the personal-information question (usesPersonalInfo) in the manifest.";
    ToxicContent => "CONT-001", "toxic-content", Content, Violation,
        "Content safety",
        "Remove profane or toxic wording from the response.";
    RatingManipulation => "CONT-002", "rating-manipulation", Content, Violation,
        "Asking for positive rating",
        "Do not ask users for a specific star rating.";
    InvocationName => "CONT-003", "invocation-name", Content, Violation,
        "Invocation name requirements",
        "Choose an invocation name of two or more lower-case words without launch phrases, connecting words or wake words.";
    KidsDataCollection => "CONT-004", "kids-data-collection", Content, Violation,
        "Kid category policy: personal data collection",
        "Kids skills must not collect personal information; remove the request.";
    KidsExternalWebsite => "CONT-005", "kids-external-website", Content, Violation,
        "Kid category policy: external website",
        "Kids skills must not direct users to or load content from external websites.";
    HealthMissingDisclaimer => "CONT-006", "health-missing-disclaimer", Content, Violation,
        "Health category policy",
        "State in the description that the skill is not a substitute for professional medical advice.";
    MaliciousResource => "CONT-007", "malicious-resource", Content, Violation,
        "External resource flagged as malicious",
        "Stop loading content from the flagged URL.";
    ExternalCollectionRequest => "CONT-008", "external-collection-request", Content, Vulnerability,
        "External content asks for personal data",
        "Review the fetched content; data requests must be visible in the skill code for certification.";
    RequestWithoutSlot => "CONS-001", "request-without-slot", Consistency, Bug,
        "Data collection request but missing a slot",
        "Add an intent with a slot and sample utterance that captures the reply, or remove the request.";
    SlotWithoutRequest => "CONS-002", "slot-without-request", Consistency, Vulnerability,
        "Data collection slot but missing a request",
        "Remove the unused data collection slot or add the request that fills it.";
    SlotWithoutUtterance => "CONS-003", "slot-without-utterance", Consistency, Bug,
        "Data collection slot but missing an utterance",
        "Add a sample utterance that references the slot, or remove the slot.";
    IntentWithoutUtterance => "CONS-004", "intent-without-utterance", Consistency, Bug,
        "Intent but missing an utterance",
        "Add sample utterances to the intent, or remove it.";
    UnknownSink => "FLOW-001", "unknown-sink", Flow, Advisory,
        "Collected data passed to an unrecognized call",
        "Check whether this call stores or transmits personal data; disclose it if so.";
}

impl RuleId {
    pub fn from_code(code: &str) -> Option<RuleId> {
        RuleId::ALL.iter().copied().find(|r| r.code() == code || r.slug() == code)
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for RuleId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleId::from_code(s).ok_or_else(|| format!("unknown rule id {s}"))
    }
}

impl Serialize for RuleId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for RuleId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Where a finding points: a source location, a model/manifest element, or
/// both, plus a short excerpt of the offending text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Evidence {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<SourceLocation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<String>,
    pub excerpt: String,
}

impl Evidence {
    pub fn at(location: SourceLocation, excerpt: &str) -> Self {
        Evidence {
            location: Some(location),
            element: None,
            excerpt: truncate_chars(excerpt, MAX_EXCERPT_CHARS).to_string(),
        }
    }

    pub fn element(element: impl Into<String>, excerpt: &str) -> Self {
        Evidence {
            location: None,
            element: Some(element.into()),
            excerpt: truncate_chars(excerpt, MAX_EXCERPT_CHARS).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule_id: RuleId,
    pub rule: String,
    pub severity: Severity,
    pub confidence: Confidence,
    pub data_source: DataSource,
    /// Sub-rule tag, e.g. the invocation-name requirement that failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_rule: Option<String>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<DataCategory>,
    pub evidence: Vec<Evidence>,
    pub remediation: String,
}

impl Finding {
    pub fn new(rule_id: RuleId, data_source: DataSource, message: impl Into<String>, evidence: Evidence) -> Self {
        Finding {
            rule_id,
            rule: rule_id.slug().to_string(),
            severity: rule_id.default_severity(),
            confidence: Confidence::High,
            data_source,
            sub_rule: None,
            message: message.into(),
            categories: Vec::new(),
            evidence: vec![evidence],
            remediation: rule_id.remediation().to_string(),
        }
    }

    pub fn with_severity(mut self, severity: Severity) -> Self {
        self.severity = severity;
        self
    }

    pub fn with_confidence(mut self, confidence: Confidence) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn with_sub_rule(mut self, sub_rule: impl Into<String>) -> Self {
        self.sub_rule = Some(sub_rule.into());
        self
    }

    pub fn with_categories(mut self, categories: impl IntoIterator<Item = DataCategory>) -> Self {
        self.categories = categories.into_iter().collect();
        self.categories.sort();
        self.categories.dedup();
        self
    }

    pub fn with_evidence(mut self, evidence: Evidence) -> Self {
        self.evidence.push(evidence);
        self
    }

    pub fn primary_location(&self) -> Option<&SourceLocation> {
        self.evidence.iter().find_map(|e| e.location.as_ref())
    }

    /// Ordering key: severity, rule, then first location.
    pub fn sort_key(&self) -> (Severity, RuleId, Option<&SourceLocation>, &str, &str) {
        let excerpt = self.evidence.first().map(|e| e.excerpt.as_str()).unwrap_or("");
        (self.severity, self.rule_id, self.primary_location(), excerpt, &self.message)
    }
}
