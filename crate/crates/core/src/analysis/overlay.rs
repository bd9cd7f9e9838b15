//! Reader-facing payload: inline spans, tags, and per-fallacy intervention
//! bundles with hedged explanations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{hedged, AnalysisResult, Level};
use crate::extraction::Article;
use crate::taxonomy::FallacyRegistry;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OverlayError {
    #[error("result does not match article: {0}")]
    InconsistentInput(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlaySentence {
    pub index: usize,
    pub paragraph: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tag {
    pub code: String,
    pub name: String,
    pub color_index: u8,
    pub context_needed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelView {
    pub level: Level,
    pub title: String,
    pub explanation: String,
    pub sentence_span: Vec<usize>,
    pub link: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionBundle {
    pub code: String,
    pub name: String,
    pub definition: String,
    pub sentence_indices: Vec<usize>,
    /// Shown when the model supplied no annotation for the code.
    pub summary: String,
    pub levels: Vec<LevelView>,
    pub wikipedia_link: String,
    pub search_link: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlayPayload {
    pub title: String,
    pub sentences: Vec<OverlaySentence>,
    /// Sentence index to codes, codes in registry order.
    pub spans: BTreeMap<usize, Vec<String>>,
    pub tags: Vec<Tag>,
    pub bundles: Vec<InterventionBundle>,
}

fn form_encode(text: &str) -> String {
    url::form_urlencoded::byte_serialize(text.as_bytes()).collect()
}

pub fn overlay_payload(
    result: &AnalysisResult,
    article: &Article,
    registry: &FallacyRegistry,
) -> Result<OverlayPayload, OverlayError> {
    let count = article.sentence_count();
    let mut tags = Vec::new();
    let mut bundles = Vec::new();
    let mut detected: Vec<_> = result.detected.iter().collect();
    detected.sort_by_key(|i| registry.position(&i.code).unwrap_or(usize::MAX));

    for instance in detected {
        let entry = registry
            .get(&instance.code)
            .ok_or_else(|| OverlayError::InconsistentInput(format!("unknown code {}", instance.code)))?;
        let spans = instance
            .layers
            .iter()
            .flat_map(|l| l.sentence_span.iter())
            .chain(instance.sentence_indices.iter());
        for &index in spans {
            if index == 0 || index > count {
                return Err(OverlayError::InconsistentInput(format!(
                    "{} references sentence {index} of {count}",
                    instance.code
                )));
            }
        }
        tags.push(Tag {
            code: entry.code.clone(),
            name: entry.name.clone(),
            color_index: entry.color_index(),
            context_needed: entry.context_needed,
        });
        let query = if result.title.trim().is_empty() {
            entry.name.clone()
        } else {
            format!("{} {}", entry.name, result.title.trim())
        };
        bundles.push(InterventionBundle {
            code: entry.code.clone(),
            name: entry.name.clone(),
            definition: entry.definition.clone(),
            sentence_indices: instance.sentence_indices.clone(),
            summary: hedged(&entry.name, ""),
            levels: instance
                .layers
                .iter()
                .map(|layer| LevelView {
                    level: layer.level,
                    title: layer.level.title().to_string(),
                    explanation: hedged(&entry.name, &layer.explanation),
                    sentence_span: layer.sentence_span.clone(),
                    link: layer.link.clone(),
                })
                .collect(),
            wikipedia_link: format!("https://en.wikipedia.org/wiki/{}", entry.wikipedia_title()),
            search_link: format!("https://www.google.com/search?q={}", form_encode(&query)),
        });
    }

    let mut spans: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for bundle in &bundles {
        for &index in &bundle.sentence_indices {
            spans.entry(index).or_default().push(bundle.code.clone());
        }
    }

    Ok(OverlayPayload {
        title: if result.title.is_empty() {
            article.title.clone().unwrap_or_default()
        } else {
            result.title.clone()
        },
        sentences: article
            .sentences()
            .iter()
            .map(|s| OverlaySentence { index: s.index, paragraph: s.paragraph, text: s.text.clone() })
            .collect(),
        spans,
        tags,
        bundles,
    })
}
