//! Front-end / back-end consistency: requests nothing can capture, slots
//! nothing asks for, and model elements no utterance can trigger.

use crate::collection::{ConsistencyGap, GapKind, GapSubject};
use crate::finding::{DataSource, Evidence, Finding, RuleId};
use crate::model::{is_builtin_intent, InteractionModel, SensitiveSlot};

/// Gaps visible from the interaction model alone: custom intents without
/// sample utterances, and sensitive slots no utterance references. A slot
/// of an utterance-less intent is covered by the intent's gap.
pub fn model_gaps(model: &InteractionModel, sensitive_slots: &[SensitiveSlot]) -> Vec<ConsistencyGap> {
    let mut gaps = Vec::new();
    for intent in model.custom_intents() {
        if intent.sample_utterances.is_empty() {
            gaps.push(ConsistencyGap {
                kind: GapKind::IntentWithoutUtterance,
                subject: GapSubject::Intent(intent.name.clone()),
            });
        }
    }
    for s in sensitive_slots {
        let Some(intent) = model.intent(&s.intent) else { continue };
        if intent.is_builtin() || intent.sample_utterances.is_empty() || s.slot.utterances_referencing > 0 {
            continue;
        }
        gaps.push(ConsistencyGap {
            kind: GapKind::SlotWithoutUtterance,
            subject: GapSubject::Slot(s.clone()),
        });
    }
    gaps
}

fn slot_element(s: &SensitiveSlot) -> Evidence {
    Evidence::element(format!("intent {} / slot {}", s.intent, s.slot.name), &s.slot.slot_type)
}

/// One finding per gap. Gaps naming a built-in intent are dropped.
pub fn check_consistency(model: &InteractionModel, gaps: &[ConsistencyGap]) -> Vec<Finding> {
    let mut out = Vec::new();
    for gap in gaps {
        let finding = match (&gap.kind, &gap.subject) {
            (GapKind::RequestWithoutSlot, GapSubject::Request(r)) => Finding::new(
                RuleId::RequestWithoutSlot,
                DataSource::Output,
                format!(
                    "The skill asks for {} (\"{}\") but no intent has a slot and sample utterance to capture the reply; it will fall through to AMAZON.FallbackIntent.",
                    r.data_category, r.sentence
                ),
                Evidence::at(r.output.location.clone(), &r.output.text),
            )
            .with_categories([r.data_category.clone()])
            .with_confidence(r.confidence),
            (GapKind::SlotWithoutRequest, GapSubject::Slot(s)) => {
                if is_builtin_intent(&s.intent) {
                    continue;
                }
                let sample = model
                    .intent(&s.intent)
                    .and_then(|i| i.sample_utterances.iter().find(|u| u.contains(&format!("{{{}}}", s.slot.name))))
                    .cloned()
                    .unwrap_or_default();
                Finding::new(
                    RuleId::SlotWithoutRequest,
                    DataSource::Slot,
                    format!(
                        "Slot {} of intent {} can capture {} but no response asks for it; the back end could start collecting it without re-certification.",
                        s.slot.name, s.intent, s.label.category
                    ),
                    slot_element(s),
                )
                .with_evidence(Evidence::element(format!("intent {} sample utterance", s.intent), &sample))
                .with_categories([s.label.category.clone()])
            }
            (GapKind::SlotWithoutUtterance, GapSubject::Slot(s)) => {
                if is_builtin_intent(&s.intent) {
                    continue;
                }
                Finding::new(
                    RuleId::SlotWithoutUtterance,
                    DataSource::Slot,
                    format!(
                        "Slot {} of intent {} is not referenced by any sample utterance, so it can never be filled.",
                        s.slot.name, s.intent
                    ),
                    slot_element(s),
                )
                .with_categories([s.label.category.clone()])
            }
            (GapKind::IntentWithoutUtterance, GapSubject::Intent(name)) => {
                if is_builtin_intent(name) {
                    continue;
                }
                Finding::new(
                    RuleId::IntentWithoutUtterance,
                    DataSource::Intent,
                    format!("Intent {name} has no sample utterances, so users cannot trigger it."),
                    Evidence::element(format!("intent {name}"), name),
                )
            }
            // subject does not match the kind: not produced by this crate
            _ => continue,
        };
        out.push(finding);
    }
    out
}
