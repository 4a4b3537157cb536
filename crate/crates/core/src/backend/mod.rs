//! Back-end extraction: handler units, output strings, recognized platform
//! API calls and local assignments, built from a shallow token-level scan of
//! js-style and py-style sources.

mod lexer;
mod scan;

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::category::DataCategory;
use crate::diagnostic::{Diagnostic, SourceLocation};
use crate::package::{Dialect, SourceUnit};
use crate::rules::PatternRegistry;

pub use lexer::{tokenize, LexError, StrLit, StrPart, TokKind, Token};

/// Identifies the analysis scope of an extracted object: its unit and the
/// innermost handler containing it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Scope {
    pub unit: usize,
    pub handler: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandlerUnit {
    pub name: String,
    pub intent_name_guess: String,
    pub start: SourceLocation,
    pub end: SourceLocation,
    /// Byte span of the body within the unit text.
    #[serde(skip)]
    pub span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzedUnit {
    pub path: PathBuf,
    pub dialect: Dialect,
    pub handlers: Vec<HandlerUnit>,
    pub comments_stripped: bool,
    #[serde(skip)]
    pub source: Option<SourceUnit>,
}

/// A string literal (or concatenation / interpolation of literals) that may
/// be spoken to the user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputString {
    /// Literal text with interpolation holes written as `⟨expr⟩`.
    pub text: String,
    /// One variable name per hole, in order.
    pub holes: Vec<String>,
    pub location: SourceLocation,
    pub handler: Option<String>,
    pub scope: Scope,
}

impl OutputString {
    pub fn hole_count(&self) -> usize {
        self.text.matches(crate::text::HOLE_OPEN).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApiKind {
    SlotAccess,
    SlotGetter,
    PermissionEndpoint,
    PermissionClient,
    ResponseSink,
    DbSink,
    HttpFetch,
}

impl ApiKind {
    pub fn is_source(self) -> bool {
        matches!(
            self,
            ApiKind::SlotAccess | ApiKind::SlotGetter | ApiKind::PermissionEndpoint | ApiKind::PermissionClient
        )
    }

    pub fn is_sink(self) -> bool {
        matches!(self, ApiKind::ResponseSink | ApiKind::DbSink)
    }

    pub fn is_permission(self) -> bool {
        matches!(self, ApiKind::PermissionEndpoint | ApiKind::PermissionClient)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiCall {
    pub kind: ApiKind,
    /// Dotted member path of the callee, or the endpoint text.
    pub callee_path: String,
    /// Variable receiving the result. Sources consumed inline get a
    /// synthesized name and `anonymous = true`.
    pub bound_variable: Option<String>,
    pub anonymous: bool,
    /// Source text of each argument (sinks) or of the written value (db writes).
    pub argument_exprs: Vec<String>,
    /// Variables referenced by the arguments.
    pub argument_vars: BTreeSet<String>,
    pub location: SourceLocation,
    pub scope: Scope,
    /// Slot name for slot sources.
    pub slot_name: Option<String>,
    /// Data category for permission sources.
    pub category: Option<DataCategory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub lhs: String,
    pub rhs_vars: BTreeSet<String>,
    pub location: SourceLocation,
    pub scope: Scope,
}

/// A call the pattern registry does not recognize, with variable arguments.
/// Used for unknown-sink advisories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallSite {
    pub callee_path: String,
    pub argument_vars: BTreeSet<String>,
    pub location: SourceLocation,
    pub scope: Scope,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendModel {
    pub units: Vec<AnalyzedUnit>,
    pub outputs: Vec<OutputString>,
    pub api_calls: Vec<ApiCall>,
    pub assignments: Vec<Assignment>,
    pub calls: Vec<CallSite>,
    pub diagnostics: Vec<Diagnostic>,
}

impl BackendModel {
    pub fn handler(&self, scope: Scope) -> Option<&HandlerUnit> {
        scope.handler.and_then(|h| self.units.get(scope.unit)?.handlers.get(h))
    }

    pub fn unit_source(&self, scope: Scope) -> Option<&SourceUnit> {
        self.units.get(scope.unit)?.source.as_ref()
    }
}

/// Extracts the back-end model from every unit. Units the lexer cannot
/// tokenize are excluded with one diagnostic each; the rest are merged in
/// path order.
pub fn extract_backend_model(units: &[SourceUnit], registry: &PatternRegistry) -> BackendModel {
    let mut sorted: Vec<&SourceUnit> = units.iter().collect();
    sorted.sort_by(|a, b| a.path.cmp(&b.path));
    let mut model = BackendModel::default();
    for unit in sorted {
        let index = model.units.len();
        match scan::scan_unit(unit, index, registry) {
            Ok(scanned) => {
                model.units.push(AnalyzedUnit {
                    path: unit.path.clone(),
                    dialect: unit.dialect,
                    handlers: scanned.handlers,
                    comments_stripped: true,
                    source: Some(unit.clone()),
                });
                model.outputs.extend(scanned.outputs);
                model.api_calls.extend(scanned.api_calls);
                model.assignments.extend(scanned.assignments);
                model.calls.extend(scanned.calls);
                model.diagnostics.extend(scanned.diagnostics);
            }
            Err(e) => {
                let (line, col) = unit.position(e.offset);
                model.diagnostics.push(
                    Diagnostic::warning(format!("could not parse source ({} at {line}:{col}), unit skipped", e.message))
                        .at(&unit.path),
                );
            }
        }
    }
    model
}

#[cfg(test)]
pub(crate) mod tests;
