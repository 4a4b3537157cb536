//! Intraprocedural taint tracking from slot and permission sources to
//! response and database sinks.
//!
//! The analysis is a flow-insensitive, set-based closure over the
//! assignments of one handler scope. Fields are collapsed onto their root
//! variable, so tainting `x` taints `x.y`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::backend::{ApiCall, ApiKind, Assignment, BackendModel, Scope};
use crate::category::DataCategory;
use crate::diagnostic::SourceLocation;
use crate::model::{classify_identifier, SensitiveSlot};
use crate::rules::Keywords;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintSource {
    pub origin: ApiCall,
    pub variable: String,
    pub data_category: DataCategory,
    pub scope: Scope,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintSink {
    pub site: ApiCall,
    pub tainted_args: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Usage {
    Response,
    Database,
    Unused,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    pub source: TaintSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sink: Option<TaintSink>,
    /// Locations of the assignments carrying taint from the source variable
    /// to the sink argument, in order.
    pub path: Vec<SourceLocation>,
    pub usage: Usage,
}

/// A tainted value passed to a call no rule models (a possible sink the
/// analysis cannot classify).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnknownSink {
    pub source_variable: String,
    pub data_category: DataCategory,
    pub callee_path: String,
    pub tainted_args: BTreeSet<String>,
    pub location: SourceLocation,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageSet {
    pub response: bool,
    pub database: bool,
    pub unused: bool,
}

/// Source calls that carry personal data. Slot sources are kept only when
/// the slot is sensitive (by the interaction model, or by its name when the
/// model does not declare it); permission sources always are, with an
/// `Unknown` category when the endpoint or method is not in the registry.
pub fn identify_sources(backend: &BackendModel, sensitive_slots: &[SensitiveSlot], keywords: &Keywords) -> Vec<TaintSource> {
    let mut out = Vec::new();
    for call in backend.api_calls.iter().filter(|c| c.kind.is_source()) {
        let category = if call.kind.is_permission() {
            call.category.clone().unwrap_or_else(DataCategory::unknown)
        } else {
            let Some(slot) = call.slot_name.as_deref() else { continue };
            let intent = backend.handler(call.scope).map(|h| h.intent_name_guess.as_str());
            let mut matches = sensitive_slots.iter().filter(|s| s.slot.name == slot);
            let declared = matches
                .clone()
                .find(|s| Some(s.intent.as_str()) == intent)
                .or_else(|| matches.next());
            match declared {
                Some(s) => s.label.category.clone(),
                None => match classify_identifier(slot, keywords) {
                    Some(label) => label.category,
                    None => continue,
                },
            }
        };
        let variable = call
            .bound_variable
            .clone()
            .unwrap_or_else(|| format!("$anon:{}:{}", call.location.line, call.location.column));
        out.push(TaintSource {
            origin: call.clone(),
            variable,
            data_category: category,
            scope: call.scope,
        });
    }
    out
}

type Reached = BTreeMap<String, Option<(usize, String)>>;

/// Breadth-first closure from `start` over the assignments of one scope.
/// Each tainted variable maps to the assignment that tainted it and the
/// variable it was tainted from (`None` for `start`), giving shortest paths.
fn closure(start: &str, assignments: &[&Assignment]) -> Reached {
    let mut reached = Reached::new();
    reached.insert(start.to_string(), None);
    let mut queue = VecDeque::from([start.to_string()]);
    while let Some(var) = queue.pop_front() {
        for (i, a) in assignments.iter().enumerate() {
            if a.rhs_vars.contains(&var) && !reached.contains_key(&a.lhs) {
                reached.insert(a.lhs.clone(), Some((i, var.clone())));
                queue.push_back(a.lhs.clone());
            }
        }
    }
    reached
}

fn path_to(var: &str, reached: &Reached, assignments: &[&Assignment]) -> Vec<SourceLocation> {
    let mut path = Vec::new();
    let mut cur = var;
    while let Some(Some((i, prev))) = reached.get(cur) {
        path.push(assignments[*i].location.clone());
        cur = prev;
    }
    path.reverse();
    path
}

/// The sorted, deduplicated assignments of one scope. Sorting makes the
/// closure independent of the order the scanner produced them in.
fn scope_assignments(backend: &BackendModel, scope: Scope) -> Vec<&Assignment> {
    let mut v: Vec<_> = backend.assignments.iter().filter(|a| a.scope == scope).collect();
    v.sort_by(|a, b| (&a.location, &a.lhs, &a.rhs_vars).cmp(&(&b.location, &b.lhs, &b.rhs_vars)));
    v.dedup();
    v
}

/// One flow per (source, reached sink); one unused flow per source that
/// reaches no sink.
pub fn compute_flows(backend: &BackendModel, sources: &[TaintSource]) -> Vec<Flow> {
    let mut flows = Vec::new();
    for source in sources {
        let assignments = scope_assignments(backend, source.scope);
        let reached = closure(&source.variable, &assignments);
        let mut any = false;
        for site in backend.api_calls.iter().filter(|c| c.kind.is_sink() && c.scope == source.scope) {
            let tainted: BTreeSet<String> = site
                .argument_vars
                .iter()
                .filter(|v| reached.contains_key(*v))
                .cloned()
                .collect();
            if tainted.is_empty() {
                continue;
            }
            any = true;
            let path = tainted
                .iter()
                .map(|v| path_to(v, &reached, &assignments))
                .min_by_key(Vec::len)
                .unwrap_or_default();
            flows.push(Flow {
                source: source.clone(),
                usage: if site.kind == ApiKind::DbSink {
                    Usage::Database
                } else {
                    Usage::Response
                },
                sink: Some(TaintSink {
                    site: site.clone(),
                    tainted_args: tainted,
                }),
                path,
            });
        }
        if !any {
            flows.push(Flow {
                source: source.clone(),
                sink: None,
                path: Vec::new(),
                usage: Usage::Unused,
            });
        }
    }
    flows
}

/// Tainted values handed to unrecognized calls or outbound HTTP requests.
/// A permission endpoint's own request is not counted.
pub fn unknown_sinks(backend: &BackendModel, sources: &[TaintSource]) -> Vec<UnknownSink> {
    let mut out: Vec<UnknownSink> = Vec::new();
    for source in sources {
        let assignments = scope_assignments(backend, source.scope);
        let reached = closure(&source.variable, &assignments);
        let http = backend
            .api_calls
            .iter()
            .filter(|c| c.kind == ApiKind::HttpFetch && source.origin.kind != ApiKind::PermissionEndpoint)
            .map(|c| (&c.callee_path, &c.argument_vars, &c.location, c.scope));
        let other = backend
            .calls
            .iter()
            .map(|c| (&c.callee_path, &c.argument_vars, &c.location, c.scope));
        for (callee, args, location, scope) in http.chain(other) {
            if scope != source.scope {
                continue;
            }
            let tainted: BTreeSet<String> = args.iter().filter(|v| reached.contains_key(*v)).cloned().collect();
            if tainted.is_empty() {
                continue;
            }
            out.push(UnknownSink {
                source_variable: source.variable.clone(),
                data_category: source.data_category.clone(),
                callee_path: callee.clone(),
                tainted_args: tainted,
                location: location.clone(),
            });
        }
    }
    out
}

/// Union of usages per data category. A category is `unused` only when
/// every one of its flows is.
pub fn summarize_usage(flows: &[Flow]) -> BTreeMap<DataCategory, UsageSet> {
    let mut map: BTreeMap<DataCategory, UsageSet> = BTreeMap::new();
    for f in flows {
        let entry = map.entry(f.source.data_category.clone()).or_default();
        match f.usage {
            Usage::Response => entry.response = true,
            Usage::Database => entry.database = true,
            Usage::Unused => {}
        }
    }
    for set in map.values_mut() {
        set.unused = !set.response && !set.database;
    }
    map
}
