//! Content-addressed analysis cache on local disk.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skeptik_core::analysis::AnalysisResult;
use skeptik_core::extraction::Article;
use skeptik_core::taxonomy::FallacyRegistry;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache storage: {0}")]
    Storage(String),
    #[error("corrupt cache entry {key}: {reason}")]
    Corrupt { key: String, reason: String },
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the registry's full serialized content, so two registries sharing
/// a version string but differing in text never share cache entries.
pub fn registry_fingerprint(registry: &FallacyRegistry) -> String {
    let digest = Sha256::digest(registry.to_toml_string().as_bytes());
    format!("{}:{}", registry.version(), hex(&digest[..8]))
}

/// Entry key: SHA-256 over the article hash, registry fingerprint, provider
/// and model, as 64 lowercase hex digits.
pub fn cache_key(content_hash: &str, registry_fingerprint: &str, provider: &str, model: &str) -> String {
    let mut h = Sha256::new();
    for part in [content_hash, registry_fingerprint, provider, model] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    hex(&h.finalize())
}

pub fn is_valid_key(key: &str) -> bool {
    key.len() == 64 && key.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

/// Enough of the article to rebuild it exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredArticle {
    pub source_url: Option<String>,
    pub title: Option<String>,
    pub paragraphs: Vec<String>,
}

impl StoredArticle {
    pub fn from_article(article: &Article) -> Self {
        Self {
            source_url: article.source_url.clone(),
            title: article.title.clone(),
            paragraphs: article.paragraphs().to_vec(),
        }
    }

    pub fn to_article(&self) -> Article {
        Article::from_paragraphs(self.paragraphs.iter())
            .with_title(self.title.clone())
            .with_source_url(self.source_url.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub article: StoredArticle,
    pub result: AnalysisResult,
    pub stored_at: DateTime<Utc>,
    /// Bumped on every in-place update such as a regeneration.
    pub version: u64,
}

#[derive(Debug, Clone)]
pub struct AnalysisCache {
    dir: PathBuf,
    locks: Arc<Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>>,
}

impl AnalysisCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, CacheError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| CacheError::Storage(format!("{}: {e}", dir.display())))?;
        let probe = dir.join(".write-probe");
        std::fs::write(&probe, b"ok").map_err(|e| CacheError::Storage(format!("{} not writable: {e}", dir.display())))?;
        let _ = std::fs::remove_file(probe);
        Ok(Self { dir, locks: Arc::default() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Per-key writer lock. Readers do not take it.
    pub fn lock_for(&self, key: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.locks.lock().expect("lock table poisoned");
        locks.entry(key.to_string()).or_default().clone()
    }

    pub async fn get(&self, key: &str) -> Result<Option<CacheEntry>, CacheError> {
        match cacache::read(&self.dir, key).await {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| CacheError::Corrupt { key: key.to_string(), reason: e.to_string() }),
            Err(cacache::Error::EntryNotFound(..)) => Ok(None),
            Err(e) => Err(CacheError::Storage(e.to_string())),
        }
    }

    pub async fn put(&self, entry: &CacheEntry) -> Result<(), CacheError> {
        let bytes = serde_json::to_vec(entry).map_err(|e| CacheError::Storage(e.to_string()))?;
        cacache::write(&self.dir, &entry.key, bytes)
            .await
            .map(|_| ())
            .map_err(|e| CacheError::Storage(e.to_string()))
    }
}
