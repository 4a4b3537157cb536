//! Command-line surface: `scan`, `corpus` and `rules`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analyze::{analyze, analyze_corpus, Config};
use crate::content::{Denylist, LexiconScorer, RemoteReputation, RemoteScorer, ReputationClient, ToxicityScorer};
use crate::fetch::{CachedFetcher, Fetcher};
use crate::finding::{RuleId, Severity};
use crate::report::{render_corpus_text, render_text, TOOL_VERSION};
use crate::rules::{KeywordSection, RuleSet};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "skill-lint", version, about = "Check voice-app skill packages for policy violations and code inconsistencies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze one skill package.
    Scan {
        /// Package directory.
        #[arg(required_unless_present = "package", conflicts_with = "package")]
        dir: Option<PathBuf>,
        /// Package directory, as an alternative to DIR.
        #[arg(long, value_name = "DIR")]
        package: Option<PathBuf>,
        #[command(flatten)]
        opts: ScanOptions,
    },
    /// Analyze every immediate subdirectory of DIR as a package.
    Corpus {
        dir: PathBuf,
        /// Worker threads; 0 uses one per CPU.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        opts: ScanOptions,
    },
    /// Print the rule registry and versions.
    Rules {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long, value_name = "FILE")]
        rules: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FailOn {
    Violation,
    Vulnerability,
    Bug,
    Never,
}

impl FailOn {
    fn threshold(self) -> Option<Severity> {
        match self {
            FailOn::Violation => Some(Severity::Violation),
            FailOn::Vulnerability => Some(Severity::Vulnerability),
            FailOn::Bug => Some(Severity::Bug),
            FailOn::Never => None,
        }
    }
}

#[derive(Debug, Args)]
struct ScanOptions {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Rules file merged over the bundled defaults.
    #[arg(long, value_name = "FILE")]
    rules: Option<PathBuf>,
    /// Fetch pages missing from the cache over the network.
    #[arg(long)]
    fetch: bool,
    /// Refetch every page and report content that changed since it was cached.
    #[arg(long)]
    recheck: bool,
    /// Page cache directory.
    #[arg(long, value_name = "DIR")]
    cache: Option<PathBuf>,
    /// Include taint flows in the report.
    #[arg(long)]
    emit_flows: bool,
    /// Keep advisory findings.
    #[arg(long)]
    enable_advisories: bool,
    /// Lowest severity that makes the exit code 1.
    #[arg(long, value_enum, default_value_t = FailOn::Violation)]
    fail_on: FailOn,
    /// URL/host denylist for external resources.
    #[arg(long, value_name = "FILE")]
    denylist: Option<PathBuf>,
    /// Overrides the rules file's toxicity threshold.
    #[arg(long, value_name = "SCORE")]
    toxicity_threshold: Option<f64>,
}

fn load_rules(path: Option<&Path>) -> crate::Result<RuleSet> {
    match path {
        Some(p) => RuleSet::from_file(p),
        None => Ok(RuleSet::default()),
    }
}

impl ScanOptions {
    fn config(&self) -> crate::Result<Config> {
        let mut rules = load_rules(self.rules.as_deref())?;
        if let Some(t) = self.toxicity_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(crate::Error::Rules(format!("toxicity threshold {t} is outside [0, 1]")));
            }
            rules.content.toxicity_threshold = t;
        }
        let fetcher: Box<dyn Fetcher> = if self.fetch || self.recheck {
            let live = CachedFetcher::live(self.cache.clone())?;
            Box::new(if self.recheck { live.rechecking() } else { live })
        } else {
            Box::new(CachedFetcher::offline(self.cache.clone()))
        };
        let scorer: Box<dyn ToxicityScorer> = match RemoteScorer::from_env() {
            Some(remote) => Box::new(remote?),
            None => Box::new(LexiconScorer::bundled()),
        };
        let reputation: Option<Box<dyn ReputationClient>> = match (&self.denylist, RemoteReputation::from_env()) {
            (Some(path), _) => Some(Box::new(Denylist::from_file(path)?)),
            (None, Some(remote)) => Some(Box::new(remote?)),
            (None, None) => None,
        };
        Ok(Config {
            rules,
            fetcher,
            scorer,
            reputation,
            enable_advisories: self.enable_advisories,
            emit_flows: self.emit_flows,
        })
    }
}

#[derive(Serialize)]
struct RuleInfo {
    rule_id: RuleId,
    slug: &'static str,
    group: &'static str,
    severity: Severity,
    problem: &'static str,
    remediation: &'static str,
}

#[derive(Serialize)]
struct RulesListing<'a> {
    tool_version: &'static str,
    rules_schema_version: u32,
    rules_version: &'a str,
    rules: Vec<RuleInfo>,
    registry: &'a RuleSet,
}

fn rules_listing(rules: &RuleSet) -> RulesListing<'_> {
    RulesListing {
        tool_version: TOOL_VERSION,
        rules_schema_version: rules.schema_version,
        rules_version: &rules.rules_version,
        rules: RuleId::ALL
            .iter()
            .map(|r| RuleInfo {
                rule_id: *r,
                slug: r.slug(),
                group: r.group().title(),
                severity: r.default_severity(),
                problem: r.problem(),
                remediation: r.remediation(),
            })
            .collect(),
        registry: rules,
    }
}

fn render_rules_text(rules: &RuleSet) -> String {
    let mut out = format!(
        "skill-lint {TOOL_VERSION}, rules {} (schema {})\n\n",
        rules.rules_version, rules.schema_version
    );
    for r in RuleId::ALL {
        out.push_str(&format!(
            "{:<9} {:<28} {:<13} {}\n",
            r.code(),
            r.slug(),
            r.default_severity().as_str(),
            r.problem()
        ));
    }
    out.push_str("\nkeywords:\n");
    for section in KeywordSection::ALL {
        let entries = rules.keywords.section(section);
        let names: Vec<&str> = entries.iter().map(|e| e.keyword.as_str()).collect();
        out.push_str(&format!("  {section:?} ({}): {}\n", entries.len(), names.join(", ")));
    }
    out
}

fn write_out(out: &mut dyn Write, text: &str) -> crate::Result<()> {
    out.write_all(text.as_bytes())
        .and_then(|_| if text.ends_with('\n') { Ok(()) } else { out.write_all(b"\n") })
        .map_err(|source| crate::Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })
}

fn run(cli: Cli, out: &mut dyn Write) -> crate::Result<i32> {
    match cli.command {
        Command::Scan { dir, package, opts } => {
            let config = opts.config()?;
            let root = dir.or(package).expect("clap requires one of dir/--package");
            let report = analyze(&root, &config)?;
            let text = match opts.format {
                Format::Text => render_text(&report),
                Format::Structured => report.to_json()?,
            };
            write_out(out, &text)?;
            Ok(if report.fails(opts.fail_on.threshold()) { EXIT_FINDINGS } else { EXIT_CLEAN })
        }
        Command::Corpus { dir, jobs, opts } => {
            let config = opts.config()?;
            if !dir.is_dir() {
                return Err(crate::Error::NotADirectory(dir));
            }
            let report = analyze_corpus(&dir, &config, jobs)?;
            let text = match opts.format {
                Format::Text => render_corpus_text(&report),
                Format::Structured => report.to_json()?,
            };
            write_out(out, &text)?;
            Ok(if report.fails(opts.fail_on.threshold()) { EXIT_FINDINGS } else { EXIT_CLEAN })
        }
        Command::Rules { format, rules } => {
            let rules = load_rules(rules.as_deref())?;
            let text = match format {
                Format::Text => render_rules_text(&rules),
                Format::Structured => serde_json::to_string_pretty(&rules_listing(&rules))?,
            };
            write_out(out, &text)?;
            Ok(EXIT_CLEAN)
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code: 0 clean, 1 findings at or above `--fail-on`, 2 usage or load
/// error.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let informational = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let rendered = e.render().to_string();
            if informational {
                let _ = out.write_all(rendered.as_bytes());
                return EXIT_CLEAN;
            }
            let _ = err.write_all(rendered.as_bytes());
            return EXIT_ERROR;
        }
    };
    match run(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "skill-lint: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("skill-lint").chain(args.iter().copied());
        let code = run_cli(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        let (code, _, err) = run_args(&["scan"]);
        assert_eq!(code, EXIT_ERROR);
        assert!(!err.is_empty());
        assert_eq!(run_args(&["frobnicate"]).0, EXIT_ERROR);
        assert_eq!(run_args(&["scan", "x", "--fail-on", "sometimes"]).0, EXIT_ERROR);
    }

    #[test]
    fn missing_package_exits_2() {
        let (code, _, err) = run_args(&["scan", "/nonexistent/skill/dir"]);
        assert_eq!(code, EXIT_ERROR);
        assert!(err.contains("skill-lint:"), "{err}");
    }

    #[test]
    fn help_and_version_exit_0() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, EXIT_CLEAN);
        assert!(out.contains("corpus"));
        assert_eq!(run_args(&["--version"]).0, EXIT_CLEAN);
    }

    #[test]
    fn rules_listing_covers_registry() {
        let (code, out, _) = run_args(&["rules"]);
        assert_eq!(code, EXIT_CLEAN);
        for r in RuleId::ALL {
            assert!(out.contains(r.code()), "{}", r.code());
        }
        let (code, out, _) = run_args(&["rules", "--format", "structured"]);
        assert_eq!(code, EXIT_CLEAN);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["rules"].as_array().unwrap().len(), RuleId::ALL.len());
        assert!(v["registry"]["keywords"].is_object());
    }

    #[test]
    fn bad_threshold_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let (code, _, err) = run_args(&["scan", dir.path().to_str().unwrap(), "--toxicity-threshold", "3"]);
        assert_eq!(code, EXIT_ERROR);
        assert!(err.contains("threshold"));
    }
}
