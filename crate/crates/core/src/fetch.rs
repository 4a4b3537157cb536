//! Web page retrieval for privacy policies and external resources.
//!
//! Pages are cached on disk as `<cache>/<sha256(url)>.txt` with a
//! `<sha256(url)>.json` sidecar holding status and timestamps. Offline runs
//! (the default) only read the cache; live runs fetch and refresh it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FETCH_TIMEOUT: Duration = Duration::from_secs(10);
pub const MAX_REDIRECTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Page {
    pub url: String,
    pub body: String,
    pub content_type: Option<String>,
    /// Seconds since the Unix epoch.
    pub retrieved_at: u64,
    /// Set on live fetches when an earlier cached copy existed: whether the
    /// content hash changed since.
    pub changed_since_cache: Option<bool>,
}

impl Page {
    pub fn looks_like_html(&self) -> bool {
        self.content_type.as_deref().is_some_and(|c| c.contains("html"))
            || self.body.trim_start().starts_with('<')
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchOutcome {
    Page(Page),
    /// The server answered with a non-success status.
    HttpStatus(u16),
    /// Network or protocol failure.
    Failed(String),
    /// Offline and not cached.
    Unavailable,
}

/// Anything that can turn a URL into a page. Implementations must be safe
/// to share across packages analyzed in parallel.
pub trait Fetcher: Send + Sync {
    fn fetch(&self, url: &str) -> FetchOutcome;
}

/// A fetcher that never has anything: every URL is unavailable.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoFetch;

impl Fetcher for NoFetch {
    fn fetch(&self, _url: &str) -> FetchOutcome {
        FetchOutcome::Unavailable
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    url: String,
    status: u16,
    #[serde(default)]
    content_type: Option<String>,
    fetched_at: u64,
    content_sha256: String,
}

pub fn cache_key(url: &str) -> String {
    hex::encode(Sha256::digest(url.as_bytes()))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn is_http(url: &str) -> bool {
    let lower = url.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://")
}

/// Cache-backed fetcher, optionally live.
pub struct CachedFetcher {
    cache_dir: Option<PathBuf>,
    client: Option<reqwest::blocking::Client>,
    /// Go to the network even when the cache has the page.
    recheck: bool,
}

impl CachedFetcher {
    /// Reads from `cache_dir` only.
    pub fn offline(cache_dir: Option<PathBuf>) -> Self {
        CachedFetcher {
            cache_dir,
            client: None,
            recheck: false,
        }
    }

    /// Serves cached pages and fetches misses over the network, writing the
    /// results into `cache_dir`.
    pub fn live(cache_dir: Option<PathBuf>) -> crate::Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(FETCH_TIMEOUT)
            .redirect(reqwest::redirect::Policy::limited(MAX_REDIRECTS))
            .user_agent(concat!("skill-lint/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| crate::Error::Http(e.to_string()))?;
        Ok(CachedFetcher {
            cache_dir,
            client: Some(client),
            recheck: false,
        })
    }

    /// Always refetches, reporting whether the content changed since the
    /// cached copy. Only meaningful for live fetchers.
    pub fn rechecking(mut self) -> Self {
        self.recheck = true;
        self
    }

    pub fn is_live(&self) -> bool {
        self.client.is_some()
    }

    fn paths(&self, url: &str) -> Option<(PathBuf, PathBuf)> {
        let dir = self.cache_dir.as_ref()?;
        let key = cache_key(url);
        Some((dir.join(format!("{key}.txt")), dir.join(format!("{key}.json"))))
    }

    fn read_sidecar(path: &Path) -> Option<Sidecar> {
        serde_json::from_str(&fs::read_to_string(path).ok()?).ok()
    }

    fn cached(&self, url: &str) -> FetchOutcome {
        let Some((body_path, meta_path)) = self.paths(url) else {
            return FetchOutcome::Unavailable;
        };
        let meta = Self::read_sidecar(&meta_path);
        if let Some(m) = &meta {
            if !(200..300).contains(&m.status) {
                return FetchOutcome::HttpStatus(m.status);
            }
        }
        match fs::read(&body_path) {
            Ok(bytes) => FetchOutcome::Page(Page {
                url: url.to_string(),
                body: String::from_utf8_lossy(&bytes).into_owned(),
                content_type: meta.as_ref().and_then(|m| m.content_type.clone()),
                retrieved_at: meta.map_or(0, |m| m.fetched_at),
                changed_since_cache: None,
            }),
            Err(_) => FetchOutcome::Unavailable,
        }
    }

    fn store(&self, url: &str, status: u16, content_type: Option<&str>, body: &str) -> std::io::Result<()> {
        let Some((body_path, meta_path)) = self.paths(url) else {
            return Ok(());
        };
        let dir = body_path.parent().expect("cache path has a parent");
        fs::create_dir_all(dir)?;
        let meta = Sidecar {
            url: url.to_string(),
            status,
            content_type: content_type.map(str::to_string),
            fetched_at: now(),
            content_sha256: hex::encode(Sha256::digest(body.as_bytes())),
        };
        write_atomic(dir, &body_path, body.as_bytes())?;
        write_atomic(dir, &meta_path, serde_json::to_string_pretty(&meta)?.as_bytes())
    }

    fn fetch_live(&self, client: &reqwest::blocking::Client, url: &str) -> FetchOutcome {
        // one retry on transport errors; HTTP statuses are final
        let mut last = String::new();
        for _ in 0..2 {
            match client.get(url).send() {
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let content_type = resp
                        .headers()
                        .get(reqwest::header::CONTENT_TYPE)
                        .and_then(|v| v.to_str().ok())
                        .map(str::to_string);
                    let body = match resp.text() {
                        Ok(b) => b,
                        Err(e) => {
                            last = e.to_string();
                            continue;
                        }
                    };
                    let previous = self
                        .paths(url)
                        .and_then(|(_, meta)| Self::read_sidecar(&meta))
                        .map(|m| m.content_sha256);
                    // cache failures are not fatal: the page is still usable
                    let _ = self.store(url, status, content_type.as_deref(), &body);
                    if !(200..300).contains(&status) {
                        return FetchOutcome::HttpStatus(status);
                    }
                    let hash = hex::encode(Sha256::digest(body.as_bytes()));
                    return FetchOutcome::Page(Page {
                        url: url.to_string(),
                        body,
                        content_type,
                        retrieved_at: now(),
                        changed_since_cache: previous.map(|p| p != hash),
                    });
                }
                Err(e) => last = e.to_string(),
            }
        }
        FetchOutcome::Failed(last)
    }
}

fn write_atomic(dir: &Path, target: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(target).map_err(|e| e.error)?;
    Ok(())
}

impl Fetcher for CachedFetcher {
    fn fetch(&self, url: &str) -> FetchOutcome {
        if !is_http(url) {
            return FetchOutcome::Failed(format!("unsupported URL scheme: {url}"));
        }
        match &self.client {
            Some(client) if self.recheck => self.fetch_live(client, url),
            Some(client) => match self.cached(url) {
                FetchOutcome::Unavailable => self.fetch_live(client, url),
                cached => cached,
            },
            None => self.cached(url),
        }
    }
}

/// Writes a page into a cache directory the way a live fetch would. Used to
/// seed caches for offline runs.
pub fn seed_cache(cache_dir: &Path, url: &str, status: u16, body: &str) -> std::io::Result<()> {
    CachedFetcher::offline(Some(cache_dir.to_path_buf())).store(url, status, None, body)
}
