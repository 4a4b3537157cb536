//! Front-end interaction model: invocation name, intents, slots and sample
//! utterances, plus the sensitivity classifiers and invocation-name rules
//! that operate on it.

mod invocation;
mod sensitivity;

pub use invocation::{check_invocation_name, InvocationRule};
pub use sensitivity::{classify_collection_utterances, classify_identifier, classify_sensitive_slots, CollectionUtterance, MatchSite, SensitiveSlot, SensitivityLabel};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diagnostic::Diagnostic;
use crate::error::{Error, Result};

/// Prefix carried by platform built-in intents and slot types.
pub const BUILTIN_PREFIX: &str = "AMAZON.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub slot_type: String,
    /// Number of the owning intent's sample utterances that reference `{name}`.
    pub utterances_referencing: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub name: String,
    pub slots: Vec<Slot>,
    pub sample_utterances: Vec<String>,
}

impl Intent {
    pub fn is_builtin(&self) -> bool {
        is_builtin_intent(&self.name)
    }

    pub fn slot(&self, name: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.name == name)
    }
}

pub fn is_builtin_intent(name: &str) -> bool {
    name.len() >= BUILTIN_PREFIX.len() && name[..BUILTIN_PREFIX.len()].eq_ignore_ascii_case(BUILTIN_PREFIX)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionModel {
    /// Kept verbatim; the invocation-name rules look at case and punctuation.
    pub invocation_name: String,
    pub intents: Vec<Intent>,
}

impl InteractionModel {
    pub fn builtin_intents(&self) -> impl Iterator<Item = &Intent> {
        self.intents.iter().filter(|i| i.is_builtin())
    }

    pub fn custom_intents(&self) -> impl Iterator<Item = &Intent> {
        self.intents.iter().filter(|i| !i.is_builtin())
    }

    pub fn intent(&self, name: &str) -> Option<&Intent> {
        self.intents.iter().find(|i| i.name == name)
    }

    /// All slots with their owning intent.
    pub fn slots(&self) -> impl Iterator<Item = (&Intent, &Slot)> {
        self.intents.iter().flat_map(|i| i.slots.iter().map(move |s| (i, s)))
    }

    /// Parses the platform interaction-model JSON. Accepts the wrapped
    /// (`interactionModel.languageModel`) and bare (`languageModel` or a
    /// top-level `intents` array) layouts.
    pub fn parse(text: &str) -> Result<(InteractionModel, Vec<Diagnostic>)> {
        let root: Value = serde_json::from_str(text).map_err(|e| Error::MalformedModel(e.to_string()))?;
        let lm = root
            .pointer("/interactionModel/languageModel")
            .or_else(|| root.get("languageModel"))
            .or_else(|| root.get("interactionModel").filter(|v| v.get("intents").is_some()))
            .or_else(|| root.get("intents").map(|_| &root))
            .ok_or_else(|| Error::MalformedModel("no languageModel or intents found".into()))?;
        let mut diagnostics = Vec::new();

        let invocation_name = lm
            .get("invocationName")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();

        let raw_intents = lm
            .get("intents")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::MalformedModel("intents is not a list".into()))?;

        let mut intents: Vec<Intent> = Vec::new();
        for raw in raw_intents {
            let Some(name) = raw
                .get("name")
                .or_else(|| raw.get("intent"))
                .and_then(Value::as_str)
                .map(str::trim)
                .filter(|n| !n.is_empty())
            else {
                diagnostics.push(Diagnostic::warning("intent without a name skipped"));
                continue;
            };
            let samples: Vec<String> = raw
                .get("samples")
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
                .unwrap_or_default();
            let mut slots: Vec<Slot> = Vec::new();
            for rs in raw.get("slots").and_then(Value::as_array).into_iter().flatten() {
                let sname = rs.get("name").and_then(Value::as_str).unwrap_or("").trim();
                let stype = rs.get("type").and_then(Value::as_str).unwrap_or("").trim();
                if sname.is_empty() || stype.is_empty() {
                    diagnostics.push(Diagnostic::warning(format!(
                        "intent {name}: slot without name or type skipped"
                    )));
                    continue;
                }
                if slots.iter().any(|s| s.name == sname) {
                    diagnostics.push(Diagnostic::warning(format!("intent {name}: duplicate slot {sname}")));
                    continue;
                }
                let referencing = samples.iter().filter(|u| placeholders(u).any(|p| p == sname)).count();
                slots.push(Slot {
                    name: sname.to_string(),
                    slot_type: stype.to_string(),
                    utterances_referencing: referencing,
                });
            }
            for sample in &samples {
                for p in placeholders(sample) {
                    if !slots.iter().any(|s| s.name == p) {
                        diagnostics.push(Diagnostic::warning(format!(
                            "intent {name}: utterance \"{sample}\" references undeclared slot {{{p}}}"
                        )));
                    }
                }
            }
            if let Some(existing) = intents.iter_mut().find(|i| i.name == name) {
                diagnostics.push(Diagnostic::warning(format!("duplicate intent {name} merged")));
                for s in slots {
                    if existing.slot(&s.name).is_none() {
                        existing.slots.push(s);
                    }
                }
                existing.sample_utterances.extend(samples);
                continue;
            }
            intents.push(Intent {
                name: name.to_string(),
                slots,
                sample_utterances: samples,
            });
        }

        Ok((InteractionModel { invocation_name, intents }, diagnostics))
    }
}

/// Slot placeholders `{name}` in a sample utterance.
pub fn placeholders(utterance: &str) -> impl Iterator<Item = &str> {
    let mut rest = utterance;
    std::iter::from_fn(move || loop {
        let open = rest.find('{')?;
        let after = &rest[open + 1..];
        let close = after.find('}')?;
        let name = after[..close].trim();
        rest = &after[close + 1..];
        if !name.is_empty() {
            return Some(name);
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FIG1_MODEL: &str = r#"{
      "interactionModel": {
        "languageModel": {
          "invocationName": "cake walk",
          "intents": [
            {"name": "AMAZON.HelpIntent", "samples": []},
            {"name": "GetNameIntent",
             "slots": [{"name": "name", "type": "AMAZON.FirstName"}],
             "samples": ["My name is {name}", "{name}"]}
          ]
        }
      }
    }"#;

    #[test]
    fn parses_wrapped_model() {
        let (m, diags) = InteractionModel::parse(FIG1_MODEL).unwrap();
        assert!(diags.is_empty());
        assert_eq!(m.invocation_name, "cake walk");
        assert_eq!(m.builtin_intents().count(), 1);
        let slot = m.intent("GetNameIntent").unwrap().slot("name").unwrap();
        assert_eq!(slot.slot_type, "AMAZON.FirstName");
        assert_eq!(slot.utterances_referencing, 2);
    }

    #[test]
    fn duplicate_intents_collapse_with_diagnostic() {
        let (m, diags) = InteractionModel::parse(
            r#"{"languageModel":{"invocationName":"x y","intents":[
                {"name":"A","samples":["one"]},{"name":"A","samples":["two"]}]}}"#,
        )
        .unwrap();
        assert_eq!(m.intents.len(), 1);
        assert_eq!(m.intents[0].sample_utterances, ["one", "two"]);
        assert_eq!(diags.len(), 1);
    }

    #[test]
    fn undeclared_placeholder_is_a_defect() {
        let (_, diags) = InteractionModel::parse(
            r#"{"intents":[{"name":"A","slots":[],"samples":["my city is {city}"]}]}"#,
        )
        .unwrap();
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("undeclared slot {city}"));
    }

    #[test]
    fn rejects_non_model_json() {
        assert!(InteractionModel::parse(r#"{"name":"package"}"#).is_err());
        assert!(InteractionModel::parse("nope").is_err());
    }

    #[test]
    fn placeholder_iteration() {
        let p: Vec<_> = placeholders("from {a} to { b } {}").collect();
        assert_eq!(p, ["a", "b"]);
    }
}
