//! Skill package discovery and loading.
//!
//! A package is a directory holding any of: a platform manifest
//! (`skill.json`), an interaction-model file per locale, and back-end source
//! files. Real repositories vary in layout, so discovery searches the whole
//! tree and never aborts on a single bad member file.

mod manifest;

pub use manifest::{parse_manifest, Manifest, PersonalInfoAnswer};

use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::{DirEntry, WalkDir};

use crate::diagnostic::{Diagnostic, LineIndex};
use crate::error::{Error, Result};
use crate::model::InteractionModel;

const MANIFEST_FILE: &str = "skill.json";
const MAX_JSON_BYTES: u64 = 4 * 1024 * 1024;

const SKIPPED_DIRS: &[&str] = &[
    "node_modules",
    ".git",
    ".ask",
    ".hg",
    ".svn",
    "__pycache__",
    ".venv",
    "venv",
    "site-packages",
    "coverage",
    "test",
    "tests",
    "__tests__",
];

const NON_MODEL_JSON: &[&str] = &[
    "skill.json",
    "package.json",
    "package-lock.json",
    "tsconfig.json",
    "jsconfig.json",
    "ask-resources.json",
    "ask-states.json",
];

const UNSUPPORTED_SOURCE: &[&str] = &["ts", "tsx", "java", "go", "rb", "cs", "php", "kt", "swift"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dialect {
    JsStyle,
    PyStyle,
}

impl Dialect {
    pub fn from_extension(ext: &str) -> Option<Dialect> {
        match ext.to_ascii_lowercase().as_str() {
            "js" | "mjs" | "cjs" => Some(Dialect::JsStyle),
            "py" => Some(Dialect::PyStyle),
            _ => None,
        }
    }
}

/// One back-end source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    /// Path relative to the package root, `/`-separated.
    pub path: PathBuf,
    pub dialect: Dialect,
    pub text: String,
    pub line_index: LineIndex,
}

impl SourceUnit {
    pub fn new(path: impl Into<PathBuf>, dialect: Dialect, text: impl Into<String>) -> Self {
        let text = text.into();
        SourceUnit {
            path: path.into(),
            dialect,
            line_index: LineIndex::new(&text),
            text,
        }
    }

    pub fn position(&self, offset: usize) -> (usize, usize) {
        self.line_index.position(&self.text, offset)
    }
}

/// A loaded skill package. Immutable after load.
#[derive(Debug, Clone)]
pub struct SkillPackage {
    pub root_path: PathBuf,
    pub manifest: Option<Manifest>,
    /// Relative path of the manifest file, when one was parsed.
    pub manifest_path: Option<PathBuf>,
    pub interaction_model: Option<InteractionModel>,
    pub model_path: Option<PathBuf>,
    pub backend_units: Vec<SourceUnit>,
    pub load_diagnostics: Vec<Diagnostic>,
}

impl SkillPackage {
    /// Reads a package member given its package-relative path.
    pub fn read_member(&self, relative: &Path) -> Option<String> {
        fs::read_to_string(self.root_path.join(relative)).ok()
    }
}

fn skipped_dir(entry: &DirEntry) -> bool {
    entry.depth() > 0
        && entry.file_type().is_dir()
        && entry
            .file_name()
            .to_str()
            .is_some_and(|n| SKIPPED_DIRS.iter().any(|s| s.eq_ignore_ascii_case(n)))
}

fn relative(root: &Path, path: &Path) -> PathBuf {
    let rel = path.strip_prefix(root).unwrap_or(path);
    let parts: Vec<String> = rel
        .components()
        .filter_map(|c| match c {
            Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect();
    PathBuf::from(parts.join("/"))
}

fn in_model_dir(rel: &Path) -> bool {
    rel.components().any(|c| {
        c.as_os_str()
            .to_str()
            .is_some_and(|s| matches!(s.to_ascii_lowercase().as_str(), "interactionmodels" | "interactionmodel" | "models"))
    })
}

struct Candidates {
    manifests: Vec<(usize, PathBuf)>,
    json: Vec<(usize, PathBuf)>,
    sources: Vec<PathBuf>,
    unsupported: Vec<PathBuf>,
    minified: Vec<PathBuf>,
}

fn scan_tree(root: &Path, diagnostics: &mut Vec<Diagnostic>) -> Candidates {
    let mut c = Candidates {
        manifests: Vec::new(),
        json: Vec::new(),
        sources: Vec::new(),
        unsupported: Vec::new(),
        minified: Vec::new(),
    };
    let walker = WalkDir::new(root)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| !skipped_dir(e));
    for entry in walker {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                let mut d = Diagnostic::warning(format!("unreadable directory entry: {e}"));
                if let Some(p) = e.path() {
                    d = d.at(relative(root, p));
                }
                diagnostics.push(d);
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = relative(root, entry.path());
        let file_name = entry.file_name().to_string_lossy().to_string();
        let ext = Path::new(&file_name)
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase())
            .unwrap_or_default();
        if file_name.eq_ignore_ascii_case(MANIFEST_FILE) {
            c.manifests.push((entry.depth(), rel));
        } else if ext == "json" {
            if !NON_MODEL_JSON.iter().any(|n| n.eq_ignore_ascii_case(&file_name)) {
                c.json.push((entry.depth(), rel));
            }
        } else if Dialect::from_extension(&ext).is_some() {
            if file_name.to_ascii_lowercase().ends_with(".min.js") {
                c.minified.push(rel);
            } else {
                c.sources.push(rel);
            }
        } else if UNSUPPORTED_SOURCE.contains(&ext.as_str()) && !file_name.ends_with(".d.ts") {
            c.unsupported.push(rel);
        }
    }
    c.manifests.sort();
    c.json.sort();
    c.sources.sort();
    c
}

fn locale_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn looks_like_model(text: &str) -> bool {
    text.contains("\"languageModel\"") || (text.contains("\"invocationName\"") && text.contains("\"intents\""))
}

/// Loads the package rooted at `root`.
///
/// The shallowest `skill.json` is the manifest; the interaction model is the
/// best locale file (en-US, then en-*, then any) found under a model
/// directory or recognized by its shape; every `.js`/`.py` file becomes a
/// source unit. Malformed members produce one diagnostic each.
pub fn load_skill_package(root: impl AsRef<Path>) -> Result<SkillPackage> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::NotADirectory(root.to_path_buf()));
    }
    let mut diagnostics = Vec::new();
    let candidates = scan_tree(root, &mut diagnostics);

    // manifest: shallowest match wins, others are noted
    let mut manifest = None;
    let mut manifest_path = None;
    for (_, rel) in &candidates.manifests {
        if manifest.is_some() {
            diagnostics.push(
                Diagnostic::info(format!(
                    "additional manifest ignored; this tree may hold several skills, scan {} separately",
                    rel.parent().map(|p| p.display().to_string()).unwrap_or_default()
                ))
                .at(rel),
            );
            continue;
        }
        let text = match fs::read(root.join(rel)).map(String::from_utf8) {
            Ok(Ok(t)) => t,
            Ok(Err(_)) => {
                diagnostics.push(Diagnostic::error("manifest is not valid UTF-8").at(rel));
                continue;
            }
            Err(e) => {
                diagnostics.push(Diagnostic::error(format!("cannot read manifest: {e}")).at(rel));
                continue;
            }
        };
        match parse_manifest(&text) {
            Ok((m, notes)) => {
                diagnostics.extend(notes.into_iter().map(|d| d.at(rel)));
                manifest = Some(m);
                manifest_path = Some(rel.clone());
            }
            Err(e) => diagnostics.push(Diagnostic::error(e.to_string()).at(rel)),
        }
    }
    if candidates.manifests.is_empty() {
        diagnostics.push(Diagnostic::warning("no skill.json manifest found"));
    }

    // interaction model
    let mut models: Vec<(u8, usize, PathBuf, Option<String>)> = Vec::new();
    for (depth, rel) in &candidates.json {
        let in_dir = in_model_dir(rel);
        let size = fs::metadata(root.join(rel)).map(|m| m.len()).unwrap_or(0);
        if size > MAX_JSON_BYTES {
            if in_dir {
                diagnostics.push(Diagnostic::warning("interaction model file too large, skipped").at(rel));
            }
            continue;
        }
        let text = fs::read(root.join(rel)).ok().map(String::from_utf8);
        match text {
            Some(Ok(t)) if in_dir || looks_like_model(&t) => {
                models.push((manifest::locale_rank(&locale_of(rel)), *depth, rel.clone(), Some(t)));
            }
            Some(Err(_)) | None if in_dir => models.push((manifest::locale_rank(&locale_of(rel)), *depth, rel.clone(), None)),
            _ => {}
        }
    }
    models.sort_by(|a, b| (a.0, a.1, &a.2).cmp(&(b.0, b.1, &b.2)));
    let mut interaction_model = None;
    let mut model_path = None;
    for (_, _, rel, text) in &models {
        let Some(text) = text else {
            diagnostics.push(Diagnostic::error("interaction model is unreadable or not valid UTF-8").at(rel));
            continue;
        };
        match InteractionModel::parse(text) {
            Ok((m, notes)) => {
                diagnostics.extend(notes.into_iter().map(|d| d.at(rel)));
                interaction_model = Some(m);
                model_path = Some(rel.clone());
                break;
            }
            Err(e) => diagnostics.push(Diagnostic::error(e.to_string()).at(rel)),
        }
    }
    if interaction_model.is_none() && models.is_empty() {
        diagnostics.push(Diagnostic::warning("no interaction model found"));
    }

    // back-end sources
    let mut backend_units = Vec::new();
    for rel in &candidates.sources {
        let dialect = rel
            .extension()
            .and_then(|e| Dialect::from_extension(&e.to_string_lossy()))
            .expect("candidate has a source extension");
        match fs::read(root.join(rel)).map(String::from_utf8) {
            Ok(Ok(text)) => backend_units.push(SourceUnit::new(rel.clone(), dialect, text)),
            Ok(Err(_)) => diagnostics.push(Diagnostic::warning("source file is not valid UTF-8, skipped").at(rel)),
            Err(e) => diagnostics.push(Diagnostic::warning(format!("cannot read source file: {e}")).at(rel)),
        }
    }
    for rel in &candidates.unsupported {
        diagnostics.push(Diagnostic::info("unsupported source dialect, excluded").at(rel));
    }
    for rel in &candidates.minified {
        diagnostics.push(Diagnostic::info("minified source excluded").at(rel));
    }
    if candidates.sources.is_empty() {
        diagnostics.push(Diagnostic::warning("no back-end source files found"));
    }

    if manifest.is_none() && interaction_model.is_none() && backend_units.is_empty() {
        return Err(Error::EmptyPackage(root.to_path_buf()));
    }

    Ok(SkillPackage {
        root_path: root.to_path_buf(),
        manifest,
        manifest_path,
        interaction_model,
        model_path,
        backend_units,
        load_diagnostics: diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostic::DiagnosticSeverity;

    fn write(root: &Path, rel: &str, text: &str) {
        let p = root.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, text).unwrap();
    }

    #[test]
    fn standard_layout() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "skill-package/skill.json", r#"{"manifest":{"privacyAndCompliance":{}}}"#);
        write(
            dir.path(),
            "skill-package/interactionModels/custom/en-US.json",
            r#"{"interactionModel":{"languageModel":{"invocationName":"cake walk","intents":[]}}}"#,
        );
        write(dir.path(), "lambda/index.js", "const a = 'hi';");
        let pkg = load_skill_package(dir.path()).unwrap();
        assert!(pkg.manifest.is_some());
        assert_eq!(pkg.interaction_model.unwrap().invocation_name, "cake walk");
        assert_eq!(pkg.backend_units.len(), 1);
        assert_eq!(pkg.backend_units[0].path, PathBuf::from("lambda/index.js"));
        assert_eq!(pkg.backend_units[0].dialect, Dialect::JsStyle);
    }

    #[test]
    fn empty_directory_is_empty_package() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_skill_package(dir.path()), Err(Error::EmptyPackage(_))));
    }

    #[test]
    fn not_a_directory() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "f.txt", "x");
        assert!(matches!(load_skill_package(dir.path().join("f.txt")), Err(Error::NotADirectory(_))));
    }

    #[test]
    fn python_only_package_has_two_warnings() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "lambda/lambda_function.py", "x = 1\n");
        let pkg = load_skill_package(dir.path()).unwrap();
        assert!(pkg.manifest.is_none());
        assert!(pkg.interaction_model.is_none());
        assert_eq!(pkg.backend_units.len(), 1);
        assert_eq!(pkg.backend_units[0].dialect, Dialect::PyStyle);
        let warnings: Vec<_> = pkg
            .load_diagnostics
            .iter()
            .filter(|d| d.severity == DiagnosticSeverity::Warning)
            .collect();
        assert_eq!(warnings.len(), 2, "{warnings:?}");
    }

    #[test]
    fn locale_preference_and_shallowest_manifest() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a/b/skill.json", r#"{"name":"deep"}"#);
        write(dir.path(), "a/skill.json", r#"{"name":"shallow"}"#);
        let model = |n: &str| format!(r#"{{"interactionModel":{{"languageModel":{{"invocationName":"{n}","intents":[]}}}}}}"#);
        write(dir.path(), "models/de-DE.json", &model("de"));
        write(dir.path(), "models/en-GB.json", &model("gb"));
        write(dir.path(), "models/en-US.json", &model("us"));
        let pkg = load_skill_package(dir.path()).unwrap();
        assert_eq!(pkg.manifest.unwrap().skill_name, "shallow");
        assert_eq!(pkg.interaction_model.unwrap().invocation_name, "us");
        assert!(pkg.load_diagnostics.iter().any(|d| d.message.contains("additional manifest")));
    }

    #[test]
    fn malformed_members_become_diagnostics() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "skill.json", "{oops");
        write(dir.path(), "models/en-US.json", "[not a model");
        write(dir.path(), "lambda/index.ts", "let x = 1;");
        fs::create_dir_all(dir.path().join("lambda")).unwrap();
        fs::write(dir.path().join("lambda/bad.js"), [0xff, 0xfe, 0x00]).unwrap();
        write(dir.path(), "lambda/index.js", "const a = 1;");
        let pkg = load_skill_package(dir.path()).unwrap();
        let per_file = |p: &str| pkg.load_diagnostics.iter().filter(|d| d.path.as_deref() == Some(Path::new(p))).count();
        assert_eq!(per_file("skill.json"), 1);
        assert_eq!(per_file("models/en-US.json"), 1);
        assert_eq!(per_file("lambda/index.ts"), 1);
        assert_eq!(per_file("lambda/bad.js"), 1);
        assert_eq!(pkg.backend_units.len(), 1);
    }

    #[test]
    fn node_modules_skipped() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "lambda/node_modules/dep/index.js", "x");
        write(dir.path(), "lambda/index.js", "y");
        let pkg = load_skill_package(dir.path()).unwrap();
        assert_eq!(pkg.backend_units.len(), 1);
    }
}
