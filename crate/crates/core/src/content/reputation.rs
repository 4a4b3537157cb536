//! URL reputation: a local denylist file or a remote lookup service.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub const REMOTE_URL_ENV: &str = "SKILL_LINT_REPUTATION_URL";
pub const REMOTE_TOKEN_ENV: &str = "SKILL_LINT_REPUTATION_TOKEN";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reputation {
    Clean,
    Flagged(String),
}

pub trait ReputationClient: Send + Sync {
    fn check(&self, url: &str) -> Result<Reputation, String>;
}

/// Denylist entries are full URLs or bare host names, one per line, with
/// `#` comments. A host entry also covers its subdomains.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Denylist {
    urls: Vec<String>,
    hosts: Vec<String>,
}

fn normalize_url(url: &str) -> String {
    url.trim().trim_end_matches('/').to_ascii_lowercase()
}

fn host_of(url: &str) -> Option<String> {
    let rest = url.split_once("://")?.1;
    let authority = rest.split(['/', '?', '#']).next()?;
    let host = authority.rsplit('@').next()?.split(':').next()?;
    (!host.is_empty()).then(|| host.to_ascii_lowercase())
}

impl Denylist {
    pub fn parse(text: &str) -> Self {
        let mut list = Denylist::default();
        for line in text.lines() {
            let entry = line.split('#').next().unwrap_or("").trim();
            if entry.is_empty() {
                continue;
            }
            if entry.contains("://") {
                list.urls.push(normalize_url(entry));
            } else {
                list.hosts.push(entry.trim_end_matches('/').to_ascii_lowercase());
            }
        }
        list
    }

    pub fn from_file(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| crate::Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::parse(&text))
    }

    pub fn len(&self) -> usize {
        self.urls.len() + self.hosts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ReputationClient for Denylist {
    fn check(&self, url: &str) -> Result<Reputation, String> {
        let n = normalize_url(url);
        if self.urls.contains(&n) {
            return Ok(Reputation::Flagged("listed in denylist".into()));
        }
        if let Some(host) = host_of(url) {
            if self.hosts.iter().any(|h| host == *h || host.ends_with(&format!(".{h}"))) {
                return Ok(Reputation::Flagged(format!("host {host} listed in denylist")));
            }
        }
        Ok(Reputation::Clean)
    }
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    url: &'a str,
}

#[derive(Deserialize)]
struct RemoteResponse {
    malicious: bool,
    #[serde(default)]
    reason: Option<String>,
}

/// Lookup service: `POST {"url": ...}` answered by
/// `{"malicious": bool, "reason": "..."}`.
pub struct RemoteReputation {
    url: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteReputation {
    pub fn new(url: impl Into<String>, token: Option<String>) -> crate::Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(10))
            .build()
            .map_err(|e| crate::Error::Http(e.to_string()))?;
        Ok(RemoteReputation {
            url: url.into(),
            token,
            client,
        })
    }

    pub fn from_env() -> Option<crate::Result<Self>> {
        let url = std::env::var(REMOTE_URL_ENV).ok().filter(|u| !u.is_empty())?;
        Some(Self::new(url, std::env::var(REMOTE_TOKEN_ENV).ok()))
    }
}

impl ReputationClient for RemoteReputation {
    fn check(&self, url: &str) -> Result<Reputation, String> {
        let mut req = self.client.post(&self.url).json(&RemoteRequest { url });
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("HTTP {}", resp.status().as_u16()));
        }
        let body: RemoteResponse = resp.json().map_err(|e| e.to_string())?;
        Ok(if body.malicious {
            Reputation::Flagged(body.reason.unwrap_or_else(|| "flagged by reputation service".into()))
        } else {
            Reputation::Clean
        })
    }
}
