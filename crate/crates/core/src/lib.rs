//! Static analysis of voice-app skill packages.
//!
//! `analyze` runs the full pipeline over one package directory and returns
//! a [`report::Report`]; the other modules expose each stage separately.

pub mod analyze;
pub mod backend;
pub mod category;
pub mod cli;
pub mod collection;
pub mod consistency;
pub mod content;
pub mod diagnostic;
pub mod error;
pub mod fetch;
pub mod finding;
pub mod model;
pub mod taint;
pub mod package;
pub mod privacy;
pub mod report;
pub mod rules;
pub mod text;

pub use analyze::{analyze, analyze_corpus, analyze_package, Config};
pub use error::{Error, Result};
