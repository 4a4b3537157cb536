//! Toxicity scoring: a bundled profanity lexicon (deterministic, offline)
//! and an HTTP client for a remote scoring service.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::words;

/// Environment variables configuring the remote scorer.
pub const REMOTE_URL_ENV: &str = "SKILL_LINT_TOXICITY_URL";
pub const REMOTE_TOKEN_ENV: &str = "SKILL_LINT_TOXICITY_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    Remote,
    Lexicon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToxicityScore {
    pub toxicity: f64,
    pub profanity: f64,
    pub scorer: ScorerKind,
}

impl ToxicityScore {
    pub fn max(&self) -> f64 {
        self.toxicity.max(self.profanity)
    }
}

#[derive(Debug, Error)]
#[error("toxicity scorer unavailable: {0}")]
pub struct ScorerUnavailable(pub String);

pub trait ToxicityScorer: Send + Sync {
    fn score(&self, text: &str) -> Result<ToxicityScore, ScorerUnavailable>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    tokens: Vec<String>,
    /// Last token also matches longer words starting with it.
    prefix: bool,
}

/// Word-list scorer. A text containing a listed word or phrase scores 1.0
/// on both axes, anything else 0.0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconScorer {
    entries: Vec<Entry>,
}

impl LexiconScorer {
    /// Parses a lexicon: one entry per line, `#` comments, a trailing `*`
    /// makes the final word a prefix.
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(|l| {
                let prefix = l.ends_with('*');
                let body = l.strip_suffix('*').unwrap_or(l).to_lowercase();
                let tokens: Vec<String> = body.split_whitespace().map(str::to_string).collect();
                (!tokens.is_empty()).then_some(Entry { tokens, prefix })
            })
            .collect();
        LexiconScorer { entries }
    }

    pub fn bundled() -> Self {
        Self::parse(crate::rules::DEFAULT_PROFANITY)
    }

    /// The first lexicon entry found in `text`, if any.
    pub fn find(&self, text: &str) -> Option<String> {
        let toks = words(text);
        for e in &self.entries {
            let n = e.tokens.len();
            if n > toks.len() {
                continue;
            }
            let hit = toks.windows(n).any(|w| {
                w.iter().zip(&e.tokens).enumerate().all(|(k, (t, p))| {
                    if k + 1 == n && e.prefix {
                        t.starts_with(p.as_str())
                    } else {
                        t == p
                    }
                })
            });
            if hit {
                return Some(e.tokens.join(" "));
            }
        }
        None
    }
}

impl ToxicityScorer for LexiconScorer {
    fn score(&self, text: &str) -> Result<ToxicityScore, ScorerUnavailable> {
        let s = if self.find(text).is_some() { 1.0 } else { 0.0 };
        Ok(ToxicityScore {
            toxicity: s,
            profanity: s,
            scorer: ScorerKind::Lexicon,
        })
    }
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct RemoteResponse {
    toxicity: f64,
    profanity: f64,
}

/// Client for a scoring service: `POST {"text": ...}` answered by
/// `{"toxicity": x, "profanity": y}` with both in [0, 1].
pub struct RemoteScorer {
    url: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteScorer {
    pub fn new(url: impl Into<String>, token: Option<String>) -> crate::Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(10))
            .build()
            .map_err(|e| crate::Error::Http(e.to_string()))?;
        Ok(RemoteScorer {
            url: url.into(),
            token,
            client,
        })
    }

    /// Configured from [`REMOTE_URL_ENV`] / [`REMOTE_TOKEN_ENV`]; `None` when
    /// no URL is set.
    pub fn from_env() -> Option<crate::Result<Self>> {
        let url = std::env::var(REMOTE_URL_ENV).ok().filter(|u| !u.is_empty())?;
        Some(Self::new(url, std::env::var(REMOTE_TOKEN_ENV).ok()))
    }
}

impl ToxicityScorer for RemoteScorer {
    fn score(&self, text: &str) -> Result<ToxicityScore, ScorerUnavailable> {
        let mut req = self.client.post(&self.url).json(&RemoteRequest { text });
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| ScorerUnavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(ScorerUnavailable(format!("HTTP {}", resp.status().as_u16())));
        }
        let body: RemoteResponse = resp.json().map_err(|e| ScorerUnavailable(e.to_string()))?;
        let clamp = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        Ok(ToxicityScore {
            toxicity: clamp(body.toxicity),
            profanity: clamp(body.profanity),
            scorer: ScorerKind::Remote,
        })
    }
}
