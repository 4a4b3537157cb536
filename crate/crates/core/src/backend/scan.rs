//! Token-level scanner for one source unit.
//!
//! Works on the flat token stream with bracket matching: member-path chains
//! are read from their root identifier, assignment right-hand sides extend to
//! the end of the expression, and string concatenation runs are resolved
//! around each literal.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::lexer::{tokenize, LexError, StrPart, TokKind, Token};
use super::{ApiCall, ApiKind, Assignment, CallSite, HandlerUnit, OutputString, Scope};
use crate::diagnostic::{Diagnostic, SourceLocation};
use crate::package::{Dialect, SourceUnit};
use crate::rules::PatternRegistry;
use crate::text::{HOLE_CLOSE, HOLE_OPEN};

const JS_KEYWORDS: &[&str] = &[
    "const", "let", "var", "function", "return", "new", "await", "async", "typeof", "instanceof", "if", "else", "for",
    "while", "do", "switch", "case", "default", "break", "continue", "try", "catch", "finally", "throw", "true", "false",
    "null", "undefined", "in", "of", "yield", "class", "extends", "import", "export", "from", "delete", "void", "static",
    "get", "set",
];

const PY_KEYWORDS: &[&str] = &[
    "def", "class", "return", "if", "elif", "else", "for", "while", "in", "not", "and", "or", "is", "None", "True",
    "False", "lambda", "import", "from", "as", "with", "try", "except", "finally", "pass", "raise", "yield", "global",
    "nonlocal", "async", "await", "del", "assert", "break", "continue",
];

/// Callee roots and method names that never count as data sinks.
const IGNORED_CALLEES: &[&str] = &[
    "console", "logger", "log", "logging", "print", "JSON", "Math", "Object", "Array", "String", "Number", "Boolean",
    "Promise", "Date", "parseInt", "parseFloat", "require", "len", "str", "int", "float", "bool", "isinstance", "list",
    "dict", "set", "tuple", "range", "enumerate", "format", "join", "split", "replace", "push", "includes", "indexOf",
    "map", "filter", "forEach", "reduce", "then", "catch", "startsWith", "endsWith", "toString", "concat", "slice",
    "substring", "append", "extend", "get", "setTimeout", "info", "debug", "warn", "error", "warning", "exception",
    "addRequestHandlers", "addErrorHandlers", "addRequestInterceptors", "addResponseInterceptors", "add_request_handler",
    "add_exception_handler", "withCard", "withSimpleCard", "set_card", "set_should_end_session", "withShouldEndSession",
    "addDirective", "add_directive", "getResponse", "emit", "t",
];

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "**=", "//=", "|=", "&=", "^=", ":="];

pub(super) struct ScannedUnit {
    pub handlers: Vec<HandlerUnit>,
    pub outputs: Vec<OutputString>,
    pub api_calls: Vec<ApiCall>,
    pub assignments: Vec<Assignment>,
    pub calls: Vec<CallSite>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Token stream plus bracket structure.
pub(super) struct View {
    pub toks: Vec<Token>,
    /// Matching bracket index for every bracket token.
    pub matching: Vec<Option<usize>>,
    /// Innermost enclosing open bracket of every token.
    pub parent: Vec<Option<usize>>,
    pub dialect: Dialect,
}

impl View {
    pub fn new(toks: Vec<Token>, dialect: Dialect) -> Self {
        let n = toks.len();
        let mut matching = vec![None; n];
        let mut parent = vec![None; n];
        let mut stack: Vec<usize> = Vec::new();
        for i in 0..n {
            parent[i] = stack.last().copied();
            match toks[i].kind {
                TokKind::Punct("(") | TokKind::Punct("[") | TokKind::Punct("{") => stack.push(i),
                TokKind::Punct(")") | TokKind::Punct("]") | TokKind::Punct("}") => {
                    if let Some(o) = stack.pop() {
                        matching[o] = Some(i);
                        matching[i] = Some(o);
                        parent[i] = stack.last().copied();
                    }
                }
                _ => {}
            }
        }
        View {
            toks,
            matching,
            parent,
            dialect,
        }
    }

    pub fn len(&self) -> usize {
        self.toks.len()
    }

    fn is_keyword(&self, s: &str) -> bool {
        match self.dialect {
            Dialect::JsStyle => JS_KEYWORDS.contains(&s),
            Dialect::PyStyle => PY_KEYWORDS.contains(&s),
        }
    }

    fn punct(&self, i: usize, p: &str) -> bool {
        self.toks.get(i).is_some_and(|t| t.is_punct(p))
    }

    fn ident(&self, i: usize) -> Option<&str> {
        self.toks.get(i).and_then(|t| t.ident())
    }

    /// Previous non-newline token.
    fn prev_sig(&self, i: usize) -> Option<usize> {
        (0..i).rev().find(|&j| !self.toks[j].is_newline())
    }

    /// Next non-newline token at or after `i`.
    fn next_sig(&self, i: usize) -> Option<usize> {
        (i..self.len()).find(|&j| !self.toks[j].is_newline())
    }

    fn is_open(&self, i: usize) -> bool {
        matches!(self.toks[i].kind, TokKind::Punct("(") | TokKind::Punct("[") | TokKind::Punct("{"))
    }

    fn is_close(&self, i: usize) -> bool {
        matches!(self.toks[i].kind, TokKind::Punct(")") | TokKind::Punct("]") | TokKind::Punct("}"))
    }

    fn is_member_dot(&self, i: usize) -> bool {
        self.punct(i, ".") || self.punct(i, "?.")
    }

    /// Whether identifier `i` starts a member chain (not a property name,
    /// not a keyword, not a definition name).
    fn is_chain_root(&self, i: usize) -> bool {
        let Some(name) = self.ident(i) else { return false };
        if self.is_keyword(name) && !matches!(name, "this" | "self" | "super") {
            return false;
        }
        match self.prev_sig(i) {
            Some(p) if self.is_member_dot(p) => false,
            Some(p) => !matches!(self.ident(p), Some("function") | Some("def") | Some("class")),
            None => true,
        }
    }

    /// Parses the member chain rooted at token `root` (identifier or string).
    pub fn chain(&self, root: usize) -> Chain {
        let mut links = Vec::new();
        let mut j = root + 1;
        while let Some(k) = self.next_sig(j) {
            if self.is_member_dot(k) && self.ident(k + 1).is_some() {
                links.push(Link::Member {
                    name: self.ident(k + 1).unwrap().to_string(),
                    tok: k + 1,
                });
                j = k + 2;
                continue;
            }
            if k != j {
                break;
            }
            if self.punct(j, "[") {
                let close = self.matching[j].unwrap_or(j);
                let key = if close == j + 2 {
                    self.toks[j + 1].str_lit().filter(|s| !s.has_holes()).map(|s| s.literal_text())
                } else {
                    None
                };
                links.push(Link::Index { key, open: j });
                j = close + 1;
            } else if self.punct(j, "(") {
                let close = self.matching[j].unwrap_or(j);
                links.push(Link::Call { open: j, close });
                j = close + 1;
            } else {
                break;
            }
        }
        Chain { root, end: j, links }
    }

    /// Walks backwards from `end` (inclusive) to the start of the operand or
    /// member chain ending there.
    fn chain_start_back(&self, end: usize) -> Option<usize> {
        let mut j = end;
        loop {
            match &self.toks[j].kind {
                TokKind::Ident(name) => {
                    if self.is_keyword(name) && !matches!(name.as_str(), "this" | "self" | "super") {
                        return None;
                    }
                    match self.prev_sig(j) {
                        Some(p) if self.is_member_dot(p) => {
                            let before = self.prev_sig(p)?;
                            j = before;
                        }
                        _ => return Some(j),
                    }
                }
                TokKind::Punct(")") | TokKind::Punct("]") => {
                    let o = self.matching[j]?;
                    if o == 0 {
                        return Some(o);
                    }
                    let pj = o - 1;
                    let attached = match &self.toks[pj].kind {
                        TokKind::Ident(n) => !self.is_keyword(n) || matches!(n.as_str(), "this" | "self"),
                        TokKind::Punct(")") | TokKind::Punct("]") => true,
                        TokKind::Str(_) => self.punct(j, "]"),
                        _ => false,
                    };
                    if attached {
                        j = pj;
                    } else {
                        return Some(o);
                    }
                }
                TokKind::Str(_) | TokKind::Num(_) => return Some(j),
                _ => return None,
            }
        }
    }

    /// End (exclusive) of the expression starting at `start`.
    fn expr_end(&self, start: usize) -> usize {
        let mut i = start;
        while i < self.len() {
            if self.is_open(i) {
                i = self.matching[i].map_or(self.len(), |m| m + 1);
                continue;
            }
            if self.is_close(i) || self.punct(i, ";") || self.punct(i, ",") {
                break;
            }
            if self.toks[i].is_newline() {
                if i == start || self.continues_after_newline(i) {
                    i += 1;
                    continue;
                }
                break;
            }
            if self.dialect == Dialect::PyStyle && self.punct(i, ":") && self.parent[i].is_none() {
                break;
            }
            i += 1;
        }
        i
    }

    fn continues_after_newline(&self, i: usize) -> bool {
        if self.dialect == Dialect::PyStyle {
            return false;
        }
        let prev_op = self.prev_sig(i).is_some_and(|p| match self.toks[p].kind {
            TokKind::Punct(p) => !matches!(p, ")" | "]" | "}" | "/regex/" | "++" | "--"),
            _ => false,
        });
        let next_op = self.next_sig(i).is_some_and(|n| {
            matches!(
                self.toks[n].kind,
                TokKind::Punct(".")
                    | TokKind::Punct("?.")
                    | TokKind::Punct("+")
                    | TokKind::Punct("*")
                    | TokKind::Punct("/")
                    | TokKind::Punct("&&")
                    | TokKind::Punct("||")
                    | TokKind::Punct("??")
                    | TokKind::Punct("?")
                    | TokKind::Punct(":")
                    | TokKind::Punct("===")
                    | TokKind::Punct("==")
                    | TokKind::Punct("!==")
                    | TokKind::Punct("!=")
            )
        });
        prev_op || next_op
    }

    /// Variables referenced in `[start, end)`: chain roots, excluding
    /// keywords, bare callee names, object keys, keyword-argument names and
    /// function bodies; plus variables inside string interpolation holes.
    pub fn expr_vars(&self, start: usize, end: usize) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut i = start;
        while i < end.min(self.len()) {
            if self.punct(i, "{") {
                let body = self
                    .prev_sig(i)
                    .is_some_and(|p| self.punct(p, ")") || self.punct(p, "=>") || self.ident(p).is_some());
                if body && i > start {
                    i = self.matching[i].map_or(end, |m| m + 1);
                    continue;
                }
            }
            match &self.toks[i].kind {
                TokKind::Ident(name) => {
                    if self.is_var_use(i, name) {
                        out.insert(name.clone());
                    }
                }
                TokKind::Str(s) => {
                    for part in &s.parts {
                        if let StrPart::Hole(expr) = part {
                            out.extend(hole_vars(expr, self.dialect));
                        }
                    }
                }
                _ => {}
            }
            i += 1;
        }
        out
    }

    fn is_var_use(&self, i: usize, name: &str) -> bool {
        if self.is_keyword(name) && !matches!(name, "this" | "self") {
            return false;
        }
        let prev = self.prev_sig(i);
        let next = self.next_sig(i + 1);
        if prev.is_some_and(|p| self.is_member_dot(p)) {
            return false;
        }
        if prev.is_some_and(|p| matches!(self.ident(p), Some("function") | Some("def") | Some("class"))) {
            return false;
        }
        if next.is_some_and(|n| n == i + 1 && self.punct(n, "(")) {
            return false;
        }
        if next.is_some_and(|n| self.punct(n, ":")) && prev.is_some_and(|p| self.punct(p, "{") || self.punct(p, ",")) {
            // object key, unless inside a py subscript or lambda
            if self.parent[i].is_some_and(|o| self.punct(o, "{")) {
                return false;
            }
        }
        if next.is_some_and(|n| self.punct(n, "=")) && self.parent[i].is_some_and(|o| self.punct(o, "(")) {
            return false;
        }
        true
    }

    /// A `{` that opens a function or block body rather than an object literal.
    fn is_body_brace(&self, i: usize) -> bool {
        self.punct(i, "{")
            && self.prev_sig(i).is_some_and(|p| {
                self.punct(p, ")")
                    || self.punct(p, "=>")
                    || matches!(self.ident(p), Some("else") | Some("try") | Some("finally") | Some("do"))
            })
    }

    /// Whether token `tok` sits inside `[start, end)` without crossing a
    /// function or block body that begins inside the range.
    pub fn directly_within(&self, tok: usize, start: usize, end: usize) -> bool {
        if !(start <= tok && tok < end) {
            return false;
        }
        let mut p = self.parent[tok];
        while let Some(o) = p {
            if o < start {
                break;
            }
            if self.is_body_brace(o) {
                return false;
            }
            p = self.parent[o];
        }
        true
    }

    fn text(&self, src: &str, start: usize, end: usize) -> String {
        if start >= end || end > self.len() {
            return String::new();
        }
        let raw = &src[self.toks[start].start..self.toks[end - 1].end];
        raw.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    /// Top-level comma-separated argument ranges inside a call's parentheses.
    fn args(&self, open: usize, close: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut s = open + 1;
        let mut i = open + 1;
        while i < close {
            if self.is_open(i) {
                i = self.matching[i].map_or(close, |m| m + 1);
                continue;
            }
            if self.punct(i, ",") {
                out.push((s, i));
                s = i + 1;
            }
            i += 1;
        }
        if (s..close).any(|k| !self.toks[k].is_newline()) {
            out.push((s, close));
        }
        out
    }
}

fn hole_vars(expr: &str, dialect: Dialect) -> BTreeSet<String> {
    match tokenize(expr, dialect) {
        Ok(toks) => {
            let v = View::new(toks, dialect);
            let n = v.len();
            v.expr_vars(0, n)
        }
        Err(_) => BTreeSet::new(),
    }
}

fn hole_root(expr: &str, dialect: Dialect) -> String {
    hole_vars(expr, dialect)
        .into_iter()
        .next()
        .or_else(|| {
            expr.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$'))
                .find(|s| !s.is_empty())
                .map(str::to_string)
        })
        .unwrap_or_else(|| expr.to_string())
}

#[derive(Debug, Clone)]
pub(super) enum Link {
    Member { name: String, tok: usize },
    Index { key: Option<String>, open: usize },
    Call { open: usize, close: usize },
}

#[derive(Debug, Clone)]
pub(super) struct Chain {
    pub root: usize,
    pub end: usize,
    pub links: Vec<Link>,
}

/// A named path segment of a chain with the token that names it.
struct Segment {
    name: String,
    tok: usize,
}

impl Chain {
    fn segments(&self, v: &View) -> Vec<Segment> {
        let mut out = vec![Segment {
            name: v.ident(self.root).unwrap_or("").to_string(),
            tok: self.root,
        }];
        for l in &self.links {
            match l {
                Link::Member { name, tok } => out.push(Segment {
                    name: name.clone(),
                    tok: *tok,
                }),
                Link::Index { key: Some(k), open, .. } => out.push(Segment {
                    name: k.clone(),
                    tok: open + 1,
                }),
                _ => {}
            }
        }
        out
    }

    /// Dotted path text up to (excluding) link `upto`.
    fn path_text(&self, v: &View, upto: usize) -> String {
        let mut s = v.ident(self.root).unwrap_or("").to_string();
        for l in &self.links[..upto] {
            match l {
                Link::Member { name, .. } => {
                    s.push('.');
                    s.push_str(name);
                }
                Link::Index { key: Some(k), .. } => {
                    s.push('.');
                    s.push_str(k);
                }
                Link::Index { key: None, .. } => s.push_str("[]"),
                Link::Call { .. } => s.push_str("()"),
            }
        }
        s
    }

    /// Method name called by link `li` (which must be a call).
    fn method_at(&self, v: &View, li: usize) -> Option<String> {
        if li == 0 {
            return v.ident(self.root).map(str::to_string);
        }
        match &self.links[li - 1] {
            Link::Member { name, .. } => Some(name.clone()),
            _ => None,
        }
    }
}

struct RawAssign {
    targets: Vec<Target>,
    augmented: bool,
    rhs: (usize, usize),
}

struct Target {
    root: String,
    segments: Vec<String>,
    member_write: bool,
    tok: usize,
}

struct PendingSource {
    call: ApiCall,
    tok: usize,
}

struct Ctx<'a> {
    unit: &'a SourceUnit,
    index: usize,
    v: View,
    reg: &'a PatternRegistry,
    handlers: Vec<HandlerUnit>,
    diagnostics: Vec<Diagnostic>,
}

impl Ctx<'_> {
    fn loc(&self, tok: usize) -> SourceLocation {
        let (line, col) = self.unit.position(self.v.toks[tok].start);
        SourceLocation::new(self.unit.path.clone(), line, col)
    }

    fn scope(&self, tok: usize) -> Scope {
        let off = self.v.toks[tok].start;
        let handler = self
            .handlers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.span.0 <= off && off < h.span.1)
            .min_by_key(|(_, h)| h.span.1 - h.span.0)
            .map(|(i, _)| i);
        Scope {
            unit: self.index,
            handler,
        }
    }

    fn handler_name(&self, scope: Scope) -> Option<String> {
        scope.handler.map(|h| self.handlers[h].name.clone())
    }

    fn text(&self, s: usize, e: usize) -> String {
        self.v.text(&self.unit.text, s, e)
    }
}

pub(super) fn scan_unit(unit: &SourceUnit, index: usize, reg: &PatternRegistry) -> Result<ScannedUnit, LexError> {
    let toks = tokenize(&unit.text, unit.dialect)?;
    let v = View::new(toks, unit.dialect);
    let mut cx = Ctx {
        unit,
        index,
        v,
        reg,
        handlers: Vec::new(),
        diagnostics: Vec::new(),
    };
    cx.handlers = find_handlers(&cx);

    let raw_assigns = find_assignments(&cx.v);
    let slot_aliases = slot_aliases(&cx, &raw_assigns);

    let mut assignments = Vec::new();
    let mut sinks: Vec<(ApiCall, Vec<(usize, usize)>)> = Vec::new();
    // rhs ranges of created assignments with their first lhs
    let mut binders: Vec<((usize, usize), String)> = Vec::new();
    for ra in &raw_assigns {
        let mut rhs_vars = cx.v.expr_vars(ra.rhs.0, ra.rhs.1);
        let mut bound = None;
        for t in &ra.targets {
            let db = t.member_write && is_db_path(reg, &t.root, &t.segments);
            if db {
                let path = std::iter::once(t.root.clone()).chain(t.segments.iter().cloned()).collect::<Vec<_>>().join(".");
                sinks.push((
                    ApiCall {
                        kind: ApiKind::DbSink,
                        callee_path: path,
                        bound_variable: None,
                        anonymous: false,
                        argument_exprs: vec![cx.text(ra.rhs.0, ra.rhs.1)],
                        argument_vars: rhs_vars.clone(),
                        location: cx.loc(t.tok),
                        scope: cx.scope(t.tok),
                        slot_name: None,
                        category: None,
                    },
                    vec![ra.rhs],
                ));
                continue;
            }
            if ra.augmented || t.member_write {
                rhs_vars.insert(t.root.clone());
            }
            let mut vars = rhs_vars.clone();
            if !(ra.augmented || t.member_write) {
                vars.remove(&t.root);
            }
            assignments.push(Assignment {
                lhs: t.root.clone(),
                rhs_vars: vars,
                location: cx.loc(t.tok),
                scope: cx.scope(t.tok),
            });
            bound.get_or_insert_with(|| t.root.clone());
        }
        if let Some(b) = bound {
            binders.push((ra.rhs, b));
        }
    }

    let mut sources: Vec<PendingSource> = Vec::new();
    let mut calls: Vec<(CallSite, Vec<(usize, usize)>)> = Vec::new();
    let mut http: Vec<PendingSource> = Vec::new();
    for i in 0..cx.v.len() {
        if !cx.v.is_chain_root(i) {
            continue;
        }
        let chain = cx.v.chain(i);
        if chain.links.is_empty() || is_definition(&cx.v, &chain) {
            continue;
        }
        classify_chain(&cx, &chain, &slot_aliases, &mut sources, &mut sinks, &mut calls, &mut http);
    }

    let (outputs, endpoint_sources) = extract_outputs(&mut cx);
    sources.extend(endpoint_sources);

    // bind sources and fetch results to the innermost enclosing assignment,
    // otherwise synthesize a variable and feed it to enclosing calls
    let mut api_calls = Vec::new();
    for mut p in sources.into_iter().chain(http) {
        let enclosing = binders
            .iter()
            .filter(|((s, e), _)| cx.v.directly_within(p.tok, *s, *e))
            .max_by_key(|((s, _), _)| *s);
        match enclosing {
            Some((_, lhs)) => p.call.bound_variable = Some(lhs.clone()),
            None => {
                let anon = format!(
                    "$anon:{}:{}:{}",
                    p.call.slot_name.as_deref().or(p.call.category.as_ref().map(|c| c.as_str())).unwrap_or("value"),
                    p.call.location.line,
                    p.call.location.column
                );
                p.call.bound_variable = Some(anon.clone());
                p.call.anonymous = true;
                for (sink, ranges) in sinks.iter_mut() {
                    if ranges.iter().any(|(s, e)| cx.v.directly_within(p.tok, *s, *e)) {
                        sink.argument_vars.insert(anon.clone());
                    }
                }
                for (site, ranges) in calls.iter_mut() {
                    if ranges.iter().any(|(s, e)| cx.v.directly_within(p.tok, *s, *e)) {
                        site.argument_vars.insert(anon.clone());
                    }
                }
            }
        }
        api_calls.push(p.call);
    }
    api_calls.extend(sinks.into_iter().map(|(s, _)| s));
    api_calls.sort_by(|a, b| (&a.location, a.kind).cmp(&(&b.location, b.kind)));
    let mut calls: Vec<CallSite> = calls
        .into_iter()
        .map(|(c, _)| c)
        .filter(|c| !c.argument_vars.is_empty())
        .collect();
    calls.sort_by(|a, b| a.location.cmp(&b.location));
    assignments.sort_by(|a, b| (&a.location, &a.lhs).cmp(&(&b.location, &b.lhs)));

    Ok(ScannedUnit {
        handlers: cx.handlers,
        outputs,
        api_calls,
        assignments,
        calls,
        diagnostics: cx.diagnostics,
    })
}

/// `name(params) {` in js-style code is a method definition, not a call.
fn is_definition(v: &View, chain: &Chain) -> bool {
    v.dialect == Dialect::JsStyle
        && chain.links.len() == 1
        && matches!(chain.links[0], Link::Call { .. })
        && v.next_sig(chain.end).is_some_and(|n| v.punct(n, "{"))
}

fn is_db_path(reg: &PatternRegistry, root: &str, segments: &[String]) -> bool {
    std::iter::once(root)
        .chain(segments.iter().map(String::as_str))
        .any(|s| reg.db_attribute_segments.iter().any(|d| d.eq_ignore_ascii_case(s)))
}

// ---------------------------------------------------------------------------
// handlers

fn handler_suffix(name: &str) -> bool {
    name.ends_with("Handler") || name.ends_with("_handler")
}

fn is_request_key(name: &str) -> bool {
    name.ends_with("Intent")
        || name.starts_with("AMAZON.")
        || matches!(name, "LaunchRequest" | "SessionEndedRequest" | "Unhandled" | "NewSession")
}

fn name_guess(name: &str) -> String {
    let stripped = name
        .strip_suffix("Handler")
        .or_else(|| name.strip_suffix("_handler"))
        .unwrap_or(name);
    if stripped.is_empty() {
        name.to_string()
    } else {
        stripped.to_string()
    }
}

fn find_handlers(cx: &Ctx) -> Vec<HandlerUnit> {
    let v = &cx.v;
    let mut found: Vec<(String, usize, usize, Option<usize>)> = Vec::new(); // name, body open, body close(excl), search start
    match v.dialect {
        Dialect::JsStyle => {
            for i in 0..v.len() {
                let Some(name) = v.ident(i).map(str::to_string).or_else(|| {
                    v.toks[i].str_lit().filter(|s| !s.has_holes()).map(|s| s.literal_text())
                }) else {
                    continue;
                };
                let is_str = v.toks[i].str_lit().is_some();
                let Some(n) = v.next_sig(i + 1) else { continue };
                let prev_is_function = v.prev_sig(i).is_some_and(|p| matches!(v.ident(p), Some("function") | Some("class")));
                let named_handler = !is_str && handler_suffix(&name);
                // NAME = {...} / NAME: {...} / NAME = function / NAME = (...) => {...}
                if (v.punct(n, "=") || v.punct(n, ":")) && (named_handler || (v.punct(n, ":") && is_request_key(&name))) {
                    if let Some(body) = value_body(v, n + 1) {
                        found.push((name, body, v.matching[body].unwrap_or(body), Some(i)));
                    }
                } else if prev_is_function && named_handler {
                    // function NAME(...) {...} / class NAME ... {...}
                    if let Some(body) = (n..v.len()).find(|&k| v.punct(k, "{")) {
                        found.push((name, body, v.matching[body].unwrap_or(body), Some(i)));
                    }
                } else if is_request_key(&name) && v.punct(n, "(") {
                    // method shorthand: GetNameIntent() {...}
                    let close = v.matching[n].unwrap_or(n);
                    if let Some(b) = v.next_sig(close + 1).filter(|&b| v.punct(b, "{")) {
                        found.push((name, b, v.matching[b].unwrap_or(b), Some(i)));
                    }
                }
            }
        }
        Dialect::PyStyle => {
            for i in 0..v.len() {
                let kw = v.ident(i);
                if !matches!(kw, Some("def") | Some("class")) {
                    continue;
                }
                let Some(name) = v.ident(i + 1) else { continue };
                let decorator_start = decorator_start(v, i);
                let decorated = decorator_start.is_some_and(|d| {
                    (d..i).any(|k| v.ident(k).is_some_and(|s| s.contains("handler")))
                });
                if !(handler_suffix(name) || (kw == Some("def") && decorated)) {
                    continue;
                }
                if let Some(end) = py_block_end(cx, i) {
                    found.push((name.to_string(), i, end, decorator_start.or(Some(i))));
                }
            }
        }
    }
    // keep innermost handlers only
    let spans: Vec<(usize, usize)> = found.iter().map(|f| (f.1, f.2)).collect();
    let mut handlers = Vec::new();
    for (k, (name, open, close, search)) in found.iter().enumerate() {
        let contains_other = spans
            .iter()
            .enumerate()
            .any(|(j, s)| j != k && s.0 >= *open && s.1 <= *close && *s != (*open, *close));
        if contains_other {
            continue;
        }
        if handlers.iter().any(|h: &(String, usize, usize, usize)| h.1 == *open) {
            continue;
        }
        handlers.push((name.clone(), *open, *close, search.unwrap_or(*open)));
    }
    handlers
        .into_iter()
        .map(|(name, open, close, search)| {
            let guess = intent_from_predicate(cx, search, close).unwrap_or_else(|| {
                if is_request_key(&name) {
                    name.clone()
                } else {
                    name_guess(&name)
                }
            });
            let end_tok = close.min(v.len() - 1);
            HandlerUnit {
                name,
                intent_name_guess: guess,
                start: cx.loc(open),
                end: cx.loc(end_tok),
                span: (v.toks[open].start, v.toks[end_tok].end),
            }
        })
        .collect()
}

/// For `= <value>` / `: <value>`, the body brace of an object literal or
/// function value.
fn value_body(v: &View, from: usize) -> Option<usize> {
    let mut k = v.next_sig(from)?;
    if v.ident(k) == Some("async") {
        k = v.next_sig(k + 1)?;
    }
    if v.punct(k, "{") {
        return Some(k);
    }
    if v.ident(k) == Some("function") || v.ident(k) == Some("class") {
        return (k..v.len()).find(|&b| v.punct(b, "{"));
    }
    if v.punct(k, "(") {
        let close = v.matching[k]?;
        let arrow = v.next_sig(close + 1).filter(|&a| v.punct(a, "=>"))?;
        return v.next_sig(arrow + 1).filter(|&b| v.punct(b, "{"));
    }
    None
}

fn decorator_start(v: &View, def_tok: usize) -> Option<usize> {
    // the line before `def` begins with `@`
    let mut line_start = def_tok;
    let mut start = None;
    loop {
        let Some(nl) = (0..line_start).rev().find(|&k| v.toks[k].is_newline() && v.parent[k].is_none()) else {
            return start;
        };
        let Some(first) = (0..nl).rev().take_while(|&k| !(v.toks[k].is_newline() && v.parent[k].is_none())).last() else {
            return start;
        };
        if v.punct(first, "@") {
            start = Some(first);
            line_start = first;
        } else {
            return start;
        }
    }
}

fn line_indent(cx: &Ctx, tok: usize) -> usize {
    let off = cx.v.toks[tok].start;
    let line_start = cx.unit.text[..off].rfind('\n').map_or(0, |i| i + 1);
    off - line_start
}

/// End offset (token index, exclusive bound for spans) of a py block whose
/// header starts at token `header`.
fn py_block_end(cx: &Ctx, header: usize) -> Option<usize> {
    let v = &cx.v;
    let indent = line_indent(cx, header);
    // header ends at the first top-level ':' followed by a newline
    let mut i = header;
    while i < v.len() {
        if v.is_open(i) {
            i = v.matching[i]? + 1;
            continue;
        }
        if v.punct(i, ":") {
            break;
        }
        i += 1;
    }
    let mut last = i;
    let mut k = i + 1;
    let mut at_line_start = false;
    while k < v.len() {
        if v.toks[k].is_newline() {
            at_line_start = v.parent[k].is_none();
            k += 1;
            continue;
        }
        if at_line_start && v.parent[k].is_none() {
            if line_indent(cx, k) <= indent {
                break;
            }
            at_line_start = false;
        }
        last = k;
        k += 1;
    }
    Some(last)
}

fn intent_from_predicate(cx: &Ctx, start: usize, end: usize) -> Option<String> {
    let v = &cx.v;
    for i in start..end.min(v.len()) {
        let Some(s) = v.toks[i].str_lit() else { continue };
        if s.has_holes() {
            continue;
        }
        let text = s.literal_text();
        if !is_request_key(&text) && !text.ends_with("Request") {
            continue;
        }
        let compared = v.prev_sig(i).is_some_and(|p| {
            matches!(v.toks[p].kind, TokKind::Punct("===") | TokKind::Punct("==") | TokKind::Punct("!=="))
        }) || v.next_sig(i + 1).is_some_and(|n| {
            matches!(v.toks[n].kind, TokKind::Punct("===") | TokKind::Punct("=="))
        });
        let predicate_arg = v.parent[i].is_some_and(|o| {
            v.punct(o, "(")
                && o > 0
                && v.ident(o - 1).is_some_and(|f| {
                    matches!(f, "is_intent_name" | "is_request_type" | "isIntentName" | "isRequestType")
                })
        });
        if compared || predicate_arg {
            return Some(text);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// assignments

fn find_assignments(v: &View) -> Vec<RawAssign> {
    let mut out = Vec::new();
    for i in 1..v.len() {
        let TokKind::Punct(op) = v.toks[i].kind else { continue };
        if !ASSIGN_OPS.contains(&op) {
            continue;
        }
        if v.parent[i].is_some_and(|o| v.punct(o, "(") || v.punct(o, "[")) && op != ":=" {
            continue;
        }
        let lhs_end = i - 1;
        if v.toks[lhs_end].is_newline() {
            continue;
        }
        let targets = if (v.punct(lhs_end, "}") || v.punct(lhs_end, "]"))
            && v.matching[lhs_end].is_some_and(|o| {
                v.prev_sig(o).is_none_or(|p| {
                    matches!(v.ident(p), Some("const") | Some("let") | Some("var")) || v.punct(p, ";")
                }) || o == 0
                    || v.toks[o - 1].is_newline()
            }) {
            destructuring_targets(v, v.matching[lhs_end].unwrap(), lhs_end)
        } else {
            let mut targets = Vec::new();
            let mut end = lhs_end;
            while let Some(t) = target_at(v, end) {
                let root = t.tok;
                targets.push(t);
                // py tuple targets: a, b = ...
                match v.prev_sig(root) {
                    Some(p) if v.dialect == Dialect::PyStyle && v.punct(p, ",") && p > 0 && !v.toks[p - 1].is_newline() => {
                        end = p - 1;
                    }
                    _ => break,
                }
            }
            targets.reverse();
            targets
        };
        if targets.is_empty() {
            continue;
        }
        let rhs_start = i + 1;
        let rhs_end = v.expr_end(rhs_start);
        out.push(RawAssign {
            targets,
            augmented: op != "=" && op != ":=",
            rhs: (rhs_start, rhs_end),
        });
    }
    out
}

fn target_at(v: &View, end: usize) -> Option<Target> {
    if v.punct(end, ")") {
        return None;
    }
    let root = v.chain_start_back(end)?;
    let name = v.ident(root)?;
    if v.is_keyword(name) && !matches!(name, "this" | "self") {
        return None;
    }
    // a chain that ends in a call is not assignable
    let chain = v.chain(root);
    if chain.end != end + 1 || chain.links.iter().any(|l| matches!(l, Link::Call { .. })) {
        return None;
    }
    let segments = chain
        .links
        .iter()
        .map(|l| match l {
            Link::Member { name, .. } => name.clone(),
            Link::Index { key: Some(k), .. } => k.clone(),
            _ => "[]".to_string(),
        })
        .collect::<Vec<_>>();
    Some(Target {
        root: name.to_string(),
        member_write: !segments.is_empty(),
        segments,
        tok: root,
    })
}

fn destructuring_targets(v: &View, open: usize, close: usize) -> Vec<Target> {
    let mut out = Vec::new();
    for k in open + 1..close {
        let Some(name) = v.ident(k) else { continue };
        if v.is_keyword(name) {
            continue;
        }
        if v.prev_sig(k).is_some_and(|p| v.is_member_dot(p)) {
            continue;
        }
        let next = v.next_sig(k + 1);
        let is_target = next.is_some_and(|n| v.punct(n, ",") || v.punct(n, "}") || v.punct(n, "]") || v.punct(n, "="));
        if is_target && v.parent[k] == Some(open) {
            out.push(Target {
                root: name.to_string(),
                segments: Vec::new(),
                member_write: false,
                tok: k,
            });
        }
    }
    out
}

fn marker_segments(reg: &PatternRegistry) -> Vec<Vec<String>> {
    reg.slot_path_markers
        .iter()
        .map(|m| m.split('.').filter(|s| !s.is_empty()).map(|s| s.to_ascii_lowercase()).collect())
        .collect()
}

/// Variables bound directly to the slots object (`const slots = ...intent.slots`).
fn slot_aliases(cx: &Ctx, assigns: &[RawAssign]) -> HashSet<String> {
    let markers = marker_segments(cx.reg);
    let mut out = HashSet::new();
    for ra in assigns {
        let Some(s) = cx.v.next_sig(ra.rhs.0) else { continue };
        let s = if cx.v.ident(s) == Some("await") { cx.v.next_sig(s + 1).unwrap_or(s) } else { s };
        if !cx.v.is_chain_root(s) {
            continue;
        }
        let chain = cx.v.chain(s);
        if chain.end < ra.rhs.1 && cx.v.next_sig(chain.end).is_some_and(|n| n < ra.rhs.1) {
            continue;
        }
        let segs: Vec<String> = chain.segments(&cx.v).into_iter().map(|s| s.name.to_ascii_lowercase()).collect();
        if markers.iter().any(|m| segs.ends_with(m)) {
            for t in &ra.targets {
                out.insert(t.root.clone());
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// chains

#[allow(clippy::too_many_arguments)]
fn classify_chain(
    cx: &Ctx,
    chain: &Chain,
    aliases: &HashSet<String>,
    sources: &mut Vec<PendingSource>,
    sinks: &mut Vec<(ApiCall, Vec<(usize, usize)>)>,
    calls: &mut Vec<(CallSite, Vec<(usize, usize)>)>,
    http: &mut Vec<PendingSource>,
) {
    let v = &cx.v;
    let reg = cx.reg;
    let segs = chain.segments(v);
    let lower: Vec<String> = segs.iter().map(|s| s.name.to_ascii_lowercase()).collect();
    let root_tok = chain.root;
    let base = |kind: ApiKind, callee: String, tok: usize| ApiCall {
        kind,
        callee_path: callee,
        bound_variable: None,
        anonymous: false,
        argument_exprs: Vec::new(),
        argument_vars: BTreeSet::new(),
        location: cx.loc(tok),
        scope: cx.scope(tok),
        slot_name: None,
        category: None,
    };

    // slot access through `.intent.slots.<name>` or a slots alias
    let mut slot_found = false;
    for m in marker_segments(reg) {
        let hit = (0..lower.len()).find(|&k| lower[k..].starts_with(&m)).map(|k| k + m.len());
        let hit = hit.or_else(|| aliases.contains(&segs[0].name).then_some(1));
        if let Some(after) = hit {
            let slot = segs.get(after);
            let mut call = base(ApiKind::SlotAccess, chain.path_text(v, chain.links.len()), root_tok);
            call.slot_name = slot.map(|s| s.name.clone());
            if call.slot_name.is_none() && aliases.contains(&segs[0].name) {
                break;
            }
            sources.push(PendingSource { call, tok: root_tok });
            slot_found = true;
            break;
        }
    }

    // permission members such as context.Geolocation
    if !slot_found {
        for pm in &reg.permission_members {
            let want: Vec<&str> = pm.path.split('.').collect();
            let names: Vec<&str> = segs.iter().map(|s| s.name.as_str()).collect();
            if let Some(k) = (0..names.len()).find(|&k| names[k..].starts_with(&want)) {
                let mut call = base(ApiKind::PermissionClient, chain.path_text(v, chain.links.len()), segs[k].tok);
                call.category = Some(pm.category.clone());
                sources.push(PendingSource { call, tok: root_tok });
                break;
            }
        }
    }

    let has_builder_before = |li: usize| -> bool {
        let mut names = vec![v.ident(chain.root).unwrap_or("")];
        for l in &chain.links[..li] {
            if let Link::Member { name, .. } = l {
                names.push(name);
            }
        }
        names.iter().any(|n| reg.response_builders.iter().any(|b| b == n))
    };

    let mut response: Option<(ApiCall, Vec<(usize, usize)>)> = None;
    for (li, link) in chain.links.iter().enumerate() {
        let Link::Call { open, close } = *link else { continue };
        let Some(method) = chain.method_at(v, li) else { continue };
        let callee = chain.path_text(v, li);
        let method_tok = if li == 0 {
            chain.root
        } else {
            match &chain.links[li - 1] {
                Link::Member { tok, .. } => *tok,
                _ => chain.root,
            }
        };
        let args = v.args(open, close);
        let arg_vars = |ranges: &[(usize, usize)]| -> BTreeSet<String> {
            ranges.iter().flat_map(|&(s, e)| v.expr_vars(s, e)).collect()
        };
        let arg_texts = |ranges: &[(usize, usize)]| -> Vec<String> { ranges.iter().map(|&(s, e)| cx.text(s, e)).collect() };
        let receiver_root = v.ident(chain.root).unwrap_or("");

        if reg.slot_getters.contains(&method) {
            let mut call = base(ApiKind::SlotGetter, callee, method_tok);
            call.slot_name = args.iter().rev().find_map(|&(s, e)| {
                (s..e).rev().find_map(|k| v.toks[k].str_lit().filter(|l| !l.has_holes()).map(|l| l.literal_text()))
            });
            sources.push(PendingSource { call, tok: method_tok });
        } else if let Some(cat) = reg.permission_client_category(&method) {
            let mut call = base(ApiKind::PermissionClient, callee, method_tok);
            call.category = Some(cat.clone());
            sources.push(PendingSource { call, tok: method_tok });
        } else if method == "emit"
            && args.first().is_some_and(|&(s, e)| {
                e == s + 1
                    && v.toks[s]
                        .str_lit()
                        .is_some_and(|l| reg.emit_response_events.iter().any(|ev| *ev == l.literal_text()))
            })
        {
            let rest = &args[1..];
            let mut call = base(ApiKind::ResponseSink, callee, method_tok);
            call.argument_exprs = arg_texts(rest);
            call.argument_vars = arg_vars(rest);
            sinks.push((call, rest.to_vec()));
        } else if reg.response_methods.contains(&method) && has_builder_before(li) {
            let entry = response.get_or_insert_with(|| (base(ApiKind::ResponseSink, callee.clone(), method_tok), Vec::new()));
            entry.0.argument_exprs.extend(arg_texts(&args));
            entry.0.argument_vars.extend(arg_vars(&args));
            entry.1.extend(args.iter().copied());
        } else if is_http(reg, &method, receiver_root, li, &args, v) {
            let mut call = base(ApiKind::HttpFetch, callee, method_tok);
            call.argument_exprs = arg_texts(&args);
            call.argument_vars = arg_vars(&args);
            http.push(PendingSource { call, tok: method_tok });
        } else if reg.db_methods.contains(&method) {
            let mut call = base(ApiKind::DbSink, callee, method_tok);
            call.argument_exprs = arg_texts(&args);
            call.argument_vars = arg_vars(&args);
            sinks.push((call, args.clone()));
        } else if !args.is_empty()
            && !IGNORED_CALLEES.contains(&method.as_str())
            && !IGNORED_CALLEES.contains(&receiver_root)
        {
            calls.push((
                CallSite {
                    callee_path: callee,
                    argument_vars: arg_vars(&args),
                    location: cx.loc(method_tok),
                    scope: cx.scope(method_tok),
                },
                args.clone(),
            ));
        }
    }
    if let Some(r) = response {
        sinks.push(r);
    }
}

fn is_http(reg: &PatternRegistry, method: &str, receiver_root: &str, li: usize, args: &[(usize, usize)], v: &View) -> bool {
    if !reg.http_methods.iter().any(|m| m == method) {
        return false;
    }
    if li == 0 {
        return matches!(method, "fetch" | "axios" | "got" | "urlopen" | "request");
    }
    if reg.http_receivers.iter().any(|r| r == receiver_root) {
        return true;
    }
    // any call of an http verb whose first argument is a URL literal
    args.first().is_some_and(|&(s, e)| {
        (s..e).any(|k| {
            v.toks[k]
                .str_lit()
                .is_some_and(|l| l.literal_text().starts_with("http://") || l.literal_text().starts_with("https://"))
        })
    })
}

// ---------------------------------------------------------------------------
// output strings

enum Piece {
    Lit(String),
    Hole { marker: String, var: String },
}

fn extract_outputs(cx: &mut Ctx) -> (Vec<OutputString>, Vec<PendingSource>) {
    let n = cx.v.len();
    let mut consumed = vec![false; n];
    let mut outputs = Vec::new();
    let mut endpoint_sources = Vec::new();
    for i in 0..n {
        if consumed[i] || cx.v.toks[i].str_lit().is_none() {
            continue;
        }
        if is_non_output_string(&cx.v, i) {
            consumed[i] = true;
            continue;
        }
        let start = run_start(&cx.v, i);
        let (pieces, strs, end) = resolve_run(cx, start);
        if strs.is_empty() {
            consumed[i] = true;
            continue;
        }
        for &s in &strs {
            consumed[s] = true;
        }
        consumed[i] = true;
        let first = strs[0];
        let mut text = String::new();
        let mut holes = Vec::new();
        for p in pieces {
            match p {
                Piece::Lit(s) => text.push_str(&s),
                Piece::Hole { marker, var } => {
                    text.push(HOLE_OPEN);
                    text.push_str(&marker);
                    text.push(HOLE_CLOSE);
                    holes.push(var);
                }
            }
        }
        let scope = cx.scope(first);
        let location = cx.loc(first);
        if cx.reg.mentions_endpoint(&text) {
            let call = ApiCall {
                kind: ApiKind::PermissionEndpoint,
                callee_path: text.clone(),
                bound_variable: None,
                anonymous: false,
                argument_exprs: Vec::new(),
                argument_vars: BTreeSet::new(),
                location: location.clone(),
                scope,
                slot_name: None,
                category: cx.reg.endpoint_category(&text),
            };
            endpoint_sources.push(PendingSource { call, tok: first });
        }
        debug_assert!(end > first);
        outputs.push(OutputString {
            text,
            holes,
            location,
            handler: cx.handler_name(scope),
            scope,
        });
    }
    (outputs, endpoint_sources)
}

/// Strings that are never spoken: module specifiers, object keys,
/// subscripts, docstrings and directive statements.
fn is_non_output_string(v: &View, i: usize) -> bool {
    let prev = v.prev_sig(i);
    let next = v.next_sig(i + 1);
    if let Some(p) = prev {
        if v.punct(p, "(") && p > 0 && matches!(v.ident(p - 1), Some("require") | Some("import") | Some("__import__")) {
            return true;
        }
        if matches!(v.ident(p), Some("from") | Some("import")) {
            return true;
        }
    }
    // object / dict key
    if next.is_some_and(|n| v.punct(n, ":"))
        && prev.is_some_and(|p| v.punct(p, "{") || v.punct(p, ","))
        && v.parent[i].is_some_and(|o| v.punct(o, "{"))
    {
        return true;
    }
    // subscript key
    if prev.is_some_and(|p| v.punct(p, "[")) && next.is_some_and(|n| v.punct(n, "]")) && prev.is_some_and(|p| {
        p > 0 && (v.ident(p - 1).is_some() || v.punct(p - 1, "]") || v.punct(p - 1, ")"))
    }) {
        return true;
    }
    // bare string statement (docstring, 'use strict')
    let block_level = v.parent[i].is_none_or(|o| v.punct(o, "{") && v.dialect == Dialect::JsStyle);
    let at_stmt_start = i == 0 || v.toks[i - 1].is_newline() || v.punct(i - 1, ";") || v.punct(i - 1, "{");
    let mut k = i + 1;
    while k < v.len() && v.toks[k].str_lit().is_some() {
        k += 1;
    }
    let at_stmt_end = k >= v.len() || v.toks[k].is_newline() || v.punct(k, ";") || v.punct(k, "}");
    block_level && at_stmt_start && at_stmt_end
}

/// Leftmost operand of the `+`-concatenation run containing string `i`.
fn run_start(v: &View, i: usize) -> usize {
    let mut left = i;
    // a string that is itself the root of a chain ('...'.format) starts here
    while let Some(p) = left.checked_sub(1).and_then(|_| v.prev_sig(left)) {
        if v.punct(p, "+") {
            let Some(q) = v.prev_sig(p) else { break };
            match v.chain_start_back(q) {
                Some(s) if s <= q => {
                    left = s;
                    continue;
                }
                _ => break,
            }
        }
        if v.dialect == Dialect::PyStyle && v.toks[p].str_lit().is_some() && v.toks[left].str_lit().is_some() {
            left = p;
            continue;
        }
        break;
    }
    left
}

/// Resolves the concatenation run starting at `start`. Returns the pieces,
/// the string tokens consumed and the end of the run.
fn resolve_run(cx: &mut Ctx, start: usize) -> (Vec<Piece>, Vec<usize>, usize) {
    let mut pieces = Vec::new();
    let mut strs = Vec::new();
    let mut i = start;
    while let Some(end) = operand_end(&cx.v, i) {
        let base = pieces.len();
        resolve_operand(cx, i, end, &mut pieces, &mut strs);
        let mut next = end;
        // py % formatting binds tighter than +
        if cx.v.dialect == Dialect::PyStyle && cx.v.punct(next, "%") && cx.v.toks[i].str_lit().is_some() && end == i + 1 {
            if let Some(arg_end) = cx.v.next_sig(next + 1).and_then(|a| operand_end(&cx.v, a).map(|e| (a, e))) {
                let (a, e) = arg_end;
                let args: Vec<(usize, usize)> = if cx.v.punct(a, "(") && e == cx.v.matching[a].unwrap_or(a) + 1 {
                    cx.v.args(a, e - 1)
                } else {
                    vec![(a, e)]
                };
                apply_positional_format(cx, &mut pieces, base, i, &args, FormatStyle::Percent);
                next = e;
            }
        }
        match cx.v.next_sig(next) {
            Some(p) if cx.v.punct(p, "+") && (p == next || cx.v.continues_after_newline(next)) => {
                match cx.v.next_sig(p + 1) {
                    Some(o) => i = o,
                    None => return (pieces, strs, next),
                }
            }
            Some(p) if cx.v.dialect == Dialect::PyStyle && p == next && cx.v.toks[p].str_lit().is_some() => i = p,
            Some(p) if cx.v.dialect == Dialect::PyStyle
                && cx.v.toks[p].str_lit().is_some()
                && cx.v.parent[p].is_some()
                && cx.v.parent[p] == cx.v.parent[i]
                && cx.v.toks[i].str_lit().is_some()
                && (next..p).all(|k| cx.v.toks[k].is_newline()) =>
            {
                i = p
            }
            _ => return (pieces, strs, next),
        }
    }
    (pieces, strs, i)
}

fn operand_end(v: &View, i: usize) -> Option<usize> {
    if i >= v.len() {
        return None;
    }
    match &v.toks[i].kind {
        TokKind::Str(_) | TokKind::Ident(_) => Some(v.chain(i).end),
        TokKind::Num(_) => Some(i + 1),
        TokKind::Punct("(") => {
            let close = v.matching[i]?;
            // continue with member links after the group
            let mut j = close + 1;
            while v.is_member_dot(j) && v.ident(j + 1).is_some() {
                j += 2;
                while v.punct(j, "(") || v.punct(j, "[") {
                    j = v.matching[j]? + 1;
                }
            }
            Some(j)
        }
        _ => None,
    }
}

#[derive(Clone, Copy)]
enum FormatStyle {
    Percent,
    Brace,
}

fn resolve_operand(cx: &mut Ctx, start: usize, end: usize, pieces: &mut Vec<Piece>, strs: &mut Vec<usize>) {
    let v = &cx.v;
    if let Some(lit) = v.toks[start].str_lit() {
        let chain = v.chain(start);
        let format_call = match chain.links.as_slice() {
            [Link::Member { name, .. }, Link::Call { open, close }, ..] if name == "format" => Some((*open, *close)),
            _ => None,
        };
        if chain.links.is_empty() || format_call.is_some() {
            strs.push(start);
            let base = pieces.len();
            for part in &lit.parts {
                match part {
                    StrPart::Lit(s) => pieces.push(Piece::Lit(s.clone())),
                    StrPart::Hole(expr) => pieces.push(Piece::Hole {
                        marker: compact(expr),
                        var: hole_root(expr, v.dialect),
                    }),
                }
            }
            if let Some((open, close)) = format_call {
                let args = v.args(open, close);
                apply_positional_format(cx, pieces, base, start, &args, FormatStyle::Brace);
            }
            return;
        }
    }
    let expr = cx.text(start, end);
    let vars = v.expr_vars(start, end);
    let var = vars.into_iter().next().unwrap_or_else(|| hole_root(&expr, v.dialect));
    pieces.push(Piece::Hole {
        marker: compact(&expr),
        var,
    });
}

fn compact(expr: &str) -> String {
    let s: String = expr
        .chars()
        .filter(|c| *c != HOLE_OPEN && *c != HOLE_CLOSE)
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    crate::text::truncate_chars(&s, 60).to_string()
}

/// Substitutes `%s`-style or `{}`-style placeholders in the literal pieces
/// `pieces[base..]` with holes when every argument is a simple name;
/// otherwise leaves the text and records a diagnostic.
fn apply_positional_format(cx: &mut Ctx, pieces: &mut Vec<Piece>, base: usize, at: usize, args: &[(usize, usize)], style: FormatStyle) {
    let v = &cx.v;
    let mut positional: Vec<String> = Vec::new();
    let mut named: BTreeMap<String, String> = BTreeMap::new();
    for &(s, e) in args {
        let toks: Vec<usize> = (s..e).filter(|&k| !v.toks[k].is_newline()).collect();
        match toks.as_slice() {
            [k] if v.ident(*k).is_some() => positional.push(v.ident(*k).unwrap().to_string()),
            [kw, eq, val] if v.ident(*kw).is_some() && v.punct(*eq, "=") && v.ident(*val).is_some() => {
                named.insert(v.ident(*kw).unwrap().to_string(), v.ident(*val).unwrap().to_string());
            }
            _ => {
                let (line, col) = cx.unit.position(v.toks[at].start);
                cx.diagnostics.push(
                    Diagnostic::info(format!("format arguments at {line}:{col} are not simple names; placeholders kept as text"))
                        .at(&cx.unit.path),
                );
                return;
            }
        }
    }
    let re = match style {
        FormatStyle::Percent => percent_placeholder(),
        FormatStyle::Brace => brace_placeholder(),
    };
    let mut position = 0usize;
    let tail = pieces.split_off(base);
    for piece in tail {
        let Piece::Lit(text) = piece else {
            pieces.push(piece);
            continue;
        };
        let mut last = 0;
        for caps in re.captures_iter(&text) {
            let m = caps.get(0).unwrap();
            let key = caps.get(1).map(|m| m.as_str()).unwrap_or("");
            let var = if key.is_empty() {
                position += 1;
                positional.get(position - 1).cloned()
            } else if let Ok(n) = key.parse::<usize>() {
                positional.get(n).cloned()
            } else {
                named.get(key).cloned()
            };
            let Some(var) = var else { continue };
            if m.start() > last {
                pieces.push(Piece::Lit(text[last..m.start()].to_string()));
            }
            pieces.push(Piece::Hole {
                marker: var.clone(),
                var,
            });
            last = m.end();
        }
        if last < text.len() || text.is_empty() {
            pieces.push(Piece::Lit(text[last..].to_string()));
        }
    }
}

fn percent_placeholder() -> &'static regex::Regex {
    static RE: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| regex::Regex::new(r"%(?:\(([A-Za-z_]\w*)\))?[-+ #0]*\d*(?:\.\d+)?[sdifr]").unwrap())
}

fn brace_placeholder() -> &'static regex::Regex {
    static RE: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| regex::Regex::new(r"\{([A-Za-z_]\w*|\d*)(?:![rsa])?(?::[^{}]*)?\}").unwrap())
}
