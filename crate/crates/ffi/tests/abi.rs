use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use skill_lint_ffi::*;

fn fixture(name: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/packages").join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = sl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn analyzer() -> *mut SlAnalyzer {
    let mut a = ptr::null_mut();
    assert_eq!(unsafe { sl_analyzer_new(ptr::null(), ptr::null(), &mut a) }, SlStatus::Ok);
    assert!(!a.is_null());
    a
}

#[test]
fn analyze_returns_structured_json() {
    let a = analyzer();
    unsafe {
        assert_eq!(sl_analyzer_set_emit_flows(a, true), SlStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(sl_analyze(a, fixture("name-and-email").as_ptr(), &mut r), SlStatus::Ok);
        let json = CStr::from_ptr(sl_report_json(r)).to_str().unwrap();
        let v: serde_json::Value = serde_json::from_str(json).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["flows"].as_array().unwrap().len(), 3);
        assert_eq!(sl_report_finding_count(r), v["findings"].as_array().unwrap().len());
        assert!(sl_report_has_violations(r));
        sl_report_free(r);
        sl_analyzer_free(a);
    }
}

#[test]
fn analyzer_is_reusable() {
    let a = analyzer();
    unsafe {
        for name in ["over-privileged", "intent-without-utterance"] {
            let mut r = ptr::null_mut();
            assert_eq!(sl_analyze(a, fixture(name).as_ptr(), &mut r), SlStatus::Ok);
            assert!(sl_report_finding_count(r) > 0);
            sl_report_free(r);
        }
        sl_analyzer_free(a);
    }
}

#[test]
fn errors_map_to_codes_with_messages() {
    let a = analyzer();
    unsafe {
        let mut r = ptr::null_mut();
        let missing = CString::new("/nonexistent/skill").unwrap();
        assert_eq!(sl_analyze(a, missing.as_ptr(), &mut r), SlStatus::NotADirectory);
        assert!(r.is_null());
        assert!(last_error().contains("/nonexistent/skill"));

        let empty = tempfile::tempdir().unwrap();
        let empty = CString::new(empty.path().to_str().unwrap()).unwrap();
        assert_eq!(sl_analyze(a, empty.as_ptr(), &mut r), SlStatus::EmptyPackage);

        assert_eq!(sl_analyze(a, ptr::null(), &mut r), SlStatus::NullArgument);
        assert_eq!(sl_analyze(ptr::null(), missing.as_ptr(), &mut r), SlStatus::NullArgument);
        assert_eq!(sl_analyze(a, missing.as_ptr(), ptr::null_mut()), SlStatus::NullArgument);
        sl_analyzer_free(a);
    }
}

#[test]
fn bad_rules_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let rules: PathBuf = dir.path().join("rules.toml");
    std::fs::write(&rules, "schema_version = \"nope\"").unwrap();
    let rules = CString::new(rules.to_str().unwrap()).unwrap();
    let mut a = ptr::null_mut();
    let status = unsafe { sl_analyzer_new(rules.as_ptr(), ptr::null(), &mut a) };
    assert_ne!(status, SlStatus::Ok);
    assert!(a.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        sl_analyzer_free(ptr::null_mut());
        sl_report_free(ptr::null_mut());
        assert!(sl_report_json(ptr::null()).is_null());
        assert_eq!(sl_report_finding_count(ptr::null()), 0);
        assert_eq!(sl_analyzer_set_advisories(ptr::null_mut(), true), SlStatus::NullArgument);
    }
    let v = unsafe { CStr::from_ptr(sl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/skill_lint.h")).unwrap();
    for name in [
        "sl_analyzer_new",
        "sl_analyzer_set_advisories",
        "sl_analyzer_set_emit_flows",
        "sl_analyzer_free",
        "sl_analyze",
        "sl_report_json",
        "sl_report_finding_count",
        "sl_report_has_violations",
        "sl_report_free",
        "sl_last_error_message",
        "sl_version",
        "SL_STATUS_EMPTY_PACKAGE",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"skill_lint.h\"\nint main(void) { SlAnalyzer *a = 0; return sl_analyzer_new(0, 0, &a) == SL_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler, skipped"),
    }
}
