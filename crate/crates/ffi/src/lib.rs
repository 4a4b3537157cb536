//! C ABI over the skill-lint analyzer.
//!
//! Handles are opaque. Every fallible call returns an [`SlStatus`]; on
//! failure the message is kept per thread and read with
//! [`sl_last_error_message`]. Strings handed out by the library stay owned
//! by the handle they came from.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use skill_lint::fetch::CachedFetcher;
use skill_lint::report::Report;
use skill_lint::rules::RuleSet;
use skill_lint::{Config, Error};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    NotADirectory = 3,
    EmptyPackage = 4,
    Io = 5,
    InvalidRules = 6,
    Internal = 7,
    Panic = 8,
}

impl From<&Error> for SlStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::NotADirectory(_) => SlStatus::NotADirectory,
            Error::EmptyPackage(_) => SlStatus::EmptyPackage,
            Error::Io { .. } => SlStatus::Io,
            Error::Rules(_) => SlStatus::InvalidRules,
            _ => SlStatus::Internal,
        }
    }
}

/// Analyzer settings plus collaborators. Reusable across packages.
pub struct SlAnalyzer {
    config: Config,
}

/// One package's analysis result.
pub struct SlReport {
    report: Report,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: SlStatus, msg: impl Into<String>) -> SlStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> SlStatus) -> SlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(SlStatus::Panic, "internal panic"))
}

/// Null means "not given".
unsafe fn opt_path(p: *const c_char) -> Result<Option<PathBuf>, SlStatus> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(|s| Some(PathBuf::from(s)))
        .map_err(|_| fail(SlStatus::InvalidUtf8, "path is not valid UTF-8"))
}

/// Creates an analyzer. `rules_path` and `cache_dir` may be null for the
/// bundled rules and no page cache. Network access is never used.
///
/// # Safety
/// Non-null string arguments must be NUL-terminated. `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_analyzer_new(
    rules_path: *const c_char,
    cache_dir: *const c_char,
    out: *mut *mut SlAnalyzer,
) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let (rules_path, cache_dir) = match (opt_path(rules_path), opt_path(cache_dir)) {
            (Ok(r), Ok(c)) => (r, c),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let rules = match rules_path {
            Some(p) => match RuleSet::from_file(&p) {
                Ok(r) => r,
                Err(e) => return fail((&e).into(), e.to_string()),
            },
            None => RuleSet::default(),
        };
        let config = Config {
            rules,
            fetcher: Box::new(CachedFetcher::offline(cache_dir)),
            ..Config::default()
        };
        *out = Box::into_raw(Box::new(SlAnalyzer { config }));
        SlStatus::Ok
    })
}

/// Keeps advisory findings in reports when `enabled` is true.
///
/// # Safety
/// `analyzer` must come from [`sl_analyzer_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sl_analyzer_set_advisories(analyzer: *mut SlAnalyzer, enabled: bool) -> SlStatus {
    match analyzer.as_mut() {
        Some(a) => {
            a.config.enable_advisories = enabled;
            SlStatus::Ok
        }
        None => fail(SlStatus::NullArgument, "analyzer is null"),
    }
}

/// Includes taint flows in reports when `enabled` is true.
///
/// # Safety
/// `analyzer` must come from [`sl_analyzer_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sl_analyzer_set_emit_flows(analyzer: *mut SlAnalyzer, enabled: bool) -> SlStatus {
    match analyzer.as_mut() {
        Some(a) => {
            a.config.emit_flows = enabled;
            SlStatus::Ok
        }
        None => fail(SlStatus::NullArgument, "analyzer is null"),
    }
}

/// # Safety
/// `analyzer` must come from [`sl_analyzer_new`] or be null, and must not
/// be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sl_analyzer_free(analyzer: *mut SlAnalyzer) {
    if !analyzer.is_null() {
        drop(Box::from_raw(analyzer));
    }
}

/// Analyzes the package directory at `path`.
///
/// # Safety
/// `analyzer` must be a live analyzer, `path` NUL-terminated, `out` valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_analyze(analyzer: *const SlAnalyzer, path: *const c_char, out: *mut *mut SlReport) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let Some(analyzer) = analyzer.as_ref() else {
            return fail(SlStatus::NullArgument, "analyzer is null");
        };
        let root = match opt_path(path) {
            Ok(Some(p)) => p,
            Ok(None) => return fail(SlStatus::NullArgument, "path is null"),
            Err(s) => return s,
        };
        let report = match skill_lint::analyze(&root, &analyzer.config) {
            Ok(r) => r,
            Err(e) => return fail((&e).into(), e.to_string()),
        };
        let json = match report.to_json() {
            Ok(j) => j,
            Err(e) => return fail(SlStatus::Internal, e.to_string()),
        };
        let json = CString::new(json).expect("serde_json escapes NUL");
        *out = Box::into_raw(Box::new(SlReport { report, json }));
        SlStatus::Ok
    })
}

/// The report as structured JSON. Owned by `report`; null if `report` is.
///
/// # Safety
/// `report` must come from [`sl_analyze`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sl_report_json(report: *const SlReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// Number of findings in the report.
///
/// # Safety
/// `report` must come from [`sl_analyze`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sl_report_finding_count(report: *const SlReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.findings.len())
}

/// True if any finding is a violation.
///
/// # Safety
/// `report` must come from [`sl_analyze`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sl_report_has_violations(report: *const SlReport) -> bool {
    report
        .as_ref()
        .is_some_and(|r| r.report.fails(Some(skill_lint::finding::Severity::Violation)))
}

/// # Safety
/// `report` must come from [`sl_analyze`] or be null, and must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn sl_report_free(report: *mut SlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call on this thread.
#[no_mangle]
pub extern "C" fn sl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, static.
#[no_mangle]
pub extern "C" fn sl_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}
