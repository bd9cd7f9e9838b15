//! Detection results: the validated model output, its canonical JSON form,
//! and the overlay payload handed to the reader UI.

mod json;
mod links;
mod overlay;
mod parse;
mod pipeline;

use std::collections::BTreeMap;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::extraction::Article;

pub use json::{locate as locate_json, parse_tolerant, repair as repair_json, Json};
pub use links::{is_allowed_search_link, sanitize_link, sanitize_links};
pub use overlay::{
    overlay_payload, InterventionBundle, LevelView, OverlayError, OverlayPayload, OverlaySentence, Tag,
};
pub use parse::{parse_llm_response, parse_response, ParseError, ParseMode, ParseOptions, ParseWarning, Parsed};
pub use pipeline::{
    AnalysisError, AnalysisInput, Analyzer, Clock, FetchError, FixedClock, PageFetcher,
    SystemClock, Analysis, DEFAULT_PARSE_RETRIES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    L1,
    L2,
    L3,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::L1, Level::L2, Level::L3];

    pub fn key(self) -> &'static str {
        match self {
            Level::L1 => "L1",
            Level::L2 => "L2",
            Level::L3 => "L3",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Level::L1 => "Basic Clarification",
            Level::L2 => "In-Depth Correction with Evidence",
            Level::L3 => "Preemptive Information and Contextual Education",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationLayer {
    pub level: Level,
    pub explanation: String,
    pub sentence_span: Vec<usize>,
    pub link: Option<String>,
}

/// One detected fallacy. `layers` is either empty (the response carried no
/// annotation block for the code) or exactly L1, L2, L3 in that order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallacyInstance {
    pub code: String,
    pub sentence_indices: Vec<usize>,
    pub layers: Vec<AnnotationLayer>,
}

impl FallacyInstance {
    pub fn layer(&self, level: Level) -> Option<&AnnotationLayer> {
        self.layers.iter().find(|l| l.level == level)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleRef {
    /// Hex SHA-256 of the whitespace-normalized sentence text.
    pub content_hash: String,
    pub url: Option<String>,
}

impl ArticleRef {
    pub fn for_article(article: &Article) -> Self {
        Self {
            content_hash: content_hash(article),
            url: article.source_url.clone(),
        }
    }
}

/// Hash of the article text, insensitive to whitespace layout.
pub fn content_hash(article: &Article) -> String {
    let normalized = article
        .sentences()
        .iter()
        .map(|s| crate::extraction::normalize_whitespace(&s.text))
        .collect::<Vec<_>>()
        .join(" ");
    hex(&Sha256::digest(normalized.as_bytes()))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub article_ref: ArticleRef,
    pub title: String,
    pub source: String,
    /// Analyzed sentences; entry `i` is sentence `i + 1`.
    pub sentences: Vec<String>,
    /// At most one instance per code, in registry order.
    pub detected: Vec<FallacyInstance>,
    pub raw_response: String,
    pub created_at: DateTime<Utc>,
}

impl AnalysisResult {
    pub fn instance(&self, code: &str) -> Option<&FallacyInstance> {
        self.detected.iter().find(|i| i.code == code)
    }

    /// Serialize in the detection-response shape, with article reference,
    /// timestamp and raw response under a top-level `metadata` object.
    pub fn to_canonical_value(&self) -> Value {
        let mut sentences = Map::new();
        for (i, text) in self.sentences.iter().enumerate() {
            sentences.insert((i + 1).to_string(), Value::String(text.clone()));
        }
        let mut code_sentences = Map::new();
        let mut annotations = Map::new();
        for instance in &self.detected {
            code_sentences.insert(instance.code.clone(), json!(instance.sentence_indices));
            if instance.layers.is_empty() {
                continue;
            }
            let mut levels = Map::new();
            for layer in &instance.layers {
                let mut entry = Map::new();
                entry.insert("explanation".into(), Value::String(layer.explanation.clone()));
                entry.insert("sentence".into(), json!(layer.sentence_span));
                if let Some(link) = &layer.link {
                    entry.insert("link".into(), Value::String(link.clone()));
                }
                levels.insert(layer.level.key().into(), Value::Array(vec![Value::Object(entry)]));
            }
            annotations.insert(instance.code.clone(), Value::Object(levels));
        }
        json!({
            "cases": [{
                "name": self.title,
                "source": self.source,
                "sentences": sentences,
                "fallacies": {
                    "logical_fallacies": self.detected.iter().map(|i| i.code.clone()).collect::<Vec<_>>(),
                    "sentences": code_sentences,
                    "annotations": annotations,
                }
            }],
            "metadata": {
                "article_ref": self.article_ref,
                "created_at": self.created_at.to_rfc3339_opts(SecondsFormat::AutoSi, true),
                "raw_response": self.raw_response,
            }
        })
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(&self.to_canonical_value()).expect("canonical value serializes")
    }

    pub fn to_canonical_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_canonical_value()).expect("canonical value serializes")
    }

    /// `sentence index -> codes` in registry order of `detected`.
    pub fn spans(&self) -> BTreeMap<usize, Vec<String>> {
        let mut spans: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for instance in &self.detected {
            for &index in &instance.sentence_indices {
                spans.entry(index).or_default().push(instance.code.clone());
            }
        }
        spans
    }
}

/// Display form of a model explanation. Every explanation is framed as a
/// possibility, never a verdict.
pub fn hedged(fallacy_name: &str, explanation: &str) -> String {
    let explanation = explanation.trim();
    if explanation.is_empty() {
        format!("This may be an example of {fallacy_name}.")
    } else {
        format!("This may be an example of {fallacy_name}: {explanation}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hedge_prefix() {
        assert_eq!(hedged("Strawman", ""), "This may be an example of Strawman.");
        assert_eq!(
            hedged("Strawman", " It distorts the claim. "),
            "This may be an example of Strawman: It distorts the claim."
        );
    }

    #[test]
    fn content_hash_ignores_whitespace_layout() {
        let a = Article::from_paragraphs(["One  two.   Three four."]);
        let b = Article::from_paragraphs(["One two.\nThree\tfour."]);
        assert_eq!(content_hash(&a), content_hash(&b));
        let c = Article::from_paragraphs(["One two. Three five."]);
        assert_ne!(content_hash(&a), content_hash(&c));
        assert_eq!(content_hash(&a).len(), 64);
    }
}
