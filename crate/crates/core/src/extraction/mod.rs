//! Article extraction from news-page HTML.
//!
//! The extractor is paragraph-oriented in the ParEx style: every `<p>` outside
//! obvious page furniture becomes a text block, blocks are clustered by their
//! parent element, the cluster carrying the most non-link text wins, and
//! blocks that are too short or too link-heavy are dropped from it.

mod segment;

use std::collections::HashMap;

use ego_tree::NodeId;
use scraper::node::Node;
use scraper::{ElementRef, Html};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use segment::{segment_sentences, ABBREVIATIONS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractionError {
    #[error("no qualifying paragraph text found")]
    NoContent,
    #[error("input is not an HTML document: {0}")]
    MalformedInput(String),
    #[error("invalid extraction config: {0}")]
    InvalidConfig(String),
}

/// Thresholds for the paragraph filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    /// Paragraphs with fewer whitespace-delimited words are dropped.
    pub min_paragraph_words: usize,
    /// Clusters with fewer low-link-density paragraphs are only chosen when
    /// nothing larger exists.
    pub min_cluster_paragraphs: usize,
    /// Maximum share of a paragraph's words that may sit inside `<a>` tags.
    pub link_density_max: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            min_paragraph_words: 8,
            min_cluster_paragraphs: 2,
            link_density_max: 0.33,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<(), ExtractionError> {
        if self.min_paragraph_words == 0 || self.min_cluster_paragraphs == 0 {
            return Err(ExtractionError::InvalidConfig(
                "word and cluster thresholds must be positive".into(),
            ));
        }
        if !(self.link_density_max > 0.0 && self.link_density_max <= 1.0) {
            return Err(ExtractionError::InvalidConfig(
                "link_density_max must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Sentence {
    /// 1-based position in the article.
    pub index: usize,
    /// 0-based ordinal of the paragraph holding the sentence.
    pub paragraph: usize,
    pub text: String,
}

/// A sentence-indexed article body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Article {
    pub source_url: Option<String>,
    pub title: Option<String>,
    paragraphs: Vec<String>,
    sentences: Vec<Sentence>,
    word_count: usize,
}

impl Article {
    /// Build an article from body paragraphs. Paragraph whitespace is
    /// normalized and empty paragraphs are discarded.
    pub fn from_paragraphs<I, S>(paragraphs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let paragraphs: Vec<String> = paragraphs
            .into_iter()
            .map(|p| normalize_whitespace(p.as_ref()))
            .filter(|p| !p.is_empty())
            .collect();
        let mut sentences = Vec::new();
        for (ordinal, paragraph) in paragraphs.iter().enumerate() {
            for text in segment_sentences(paragraph) {
                sentences.push(Sentence {
                    index: sentences.len() + 1,
                    paragraph: ordinal,
                    text,
                });
            }
        }
        let word_count = paragraphs.iter().map(|p| count_words(p)).sum();
        Self {
            source_url: None,
            title: None,
            paragraphs,
            sentences,
            word_count,
        }
    }

    pub fn with_title(mut self, title: Option<String>) -> Self {
        self.title = title;
        self
    }

    pub fn with_source_url(mut self, url: Option<String>) -> Self {
        self.source_url = url;
        self
    }

    pub fn paragraphs(&self) -> &[String] {
        &self.paragraphs
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    /// Sentence text by 1-based index.
    pub fn sentence(&self, index: usize) -> Option<&str> {
        index
            .checked_sub(1)
            .and_then(|i| self.sentences.get(i))
            .map(|s| s.text.as_str())
    }

    pub fn word_count(&self) -> usize {
        self.word_count
    }

    /// Body text with paragraphs separated by blank lines.
    pub fn body_text(&self) -> String {
        self.paragraphs.join("\n\n")
    }

    /// Minimal HTML document containing only this article.
    pub fn to_html(&self) -> String {
        let mut html = String::from("<!DOCTYPE html><html><head>");
        if let Some(title) = &self.title {
            html.push_str(&format!("<title>{}</title>", escape_html(title)));
        }
        html.push_str("</head><body><article>");
        for p in &self.paragraphs {
            html.push_str(&format!("<p>{}</p>", escape_html(p)));
        }
        html.push_str("</article></body></html>");
        html
    }
}

/// Whitespace-delimited token count of the article body.
pub fn word_count(article: &Article) -> usize {
    article.word_count()
}

pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn escape_html(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Plain-text entry point: paragraphs are separated by blank lines and no
/// boilerplate filtering is applied.
pub fn article_from_text(text: &str) -> Result<Article, ExtractionError> {
    let mut paragraphs = Vec::new();
    let mut current = String::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.trim().is_empty() {
                paragraphs.push(std::mem::take(&mut current));
            }
            current.clear();
        } else {
            current.push(' ');
            current.push_str(line);
        }
    }
    if !current.trim().is_empty() {
        paragraphs.push(current);
    }
    let article = Article::from_paragraphs(paragraphs);
    if article.sentence_count() == 0 {
        return Err(ExtractionError::NoContent);
    }
    Ok(article)
}

/// Ancestors whose paragraphs are page furniture rather than article body.
const SKIPPED_TAGS: &[&str] = &[
    "nav", "header", "footer", "aside", "form", "script", "style", "noscript", "template",
    "menu", "figure", "figcaption", "button", "dialog",
];

/// Substrings of `class`/`id` values marking furniture containers.
const FURNITURE_HINTS: &[&str] = &[
    "cookie", "consent", "banner", "newsletter", "subscribe", "promo", "advert", "sponsor",
    "social", "share", "comment", "related", "sidebar", "footer", "navbar", "menu", "popup",
    "modal", "breadcrumb",
];

struct Block {
    order: usize,
    parent: Option<NodeId>,
    text: String,
    words: usize,
    link_words: usize,
}

struct Heading {
    order: usize,
    level: u8,
    text: String,
}

fn is_furniture(element: &ElementRef<'_>) -> bool {
    let el = element.value();
    if SKIPPED_TAGS.contains(&el.name()) {
        return true;
    }
    let hinted = |value: Option<&str>| {
        value.is_some_and(|v| {
            let v = v.to_ascii_lowercase();
            FURNITURE_HINTS.iter().any(|h| v.contains(h))
        })
    };
    hinted(el.attr("class")) || hinted(el.attr("id")) || el.attr("hidden").is_some()
}

/// The element itself or any ancestor is page furniture.
fn in_furniture(element: &ElementRef<'_>) -> bool {
    is_furniture(element)
        || element
            .ancestors()
            .filter_map(ElementRef::wrap)
            .any(|a| is_furniture(&a))
}

/// Visible text of an element, with `<br>` treated as whitespace.
/// Returns (normalized text, words inside links).
fn block_text(element: &ElementRef<'_>) -> (String, usize) {
    let mut text = String::new();
    let mut link_text = String::new();
    for node in element.descendants() {
        match node.value() {
            Node::Text(t) => {
                let inside_link = node
                    .ancestors()
                    .take_while(|a| a.id() != element.id())
                    .filter_map(ElementRef::wrap)
                    .any(|a| a.value().name() == "a");
                let inside_code = node
                    .ancestors()
                    .take_while(|a| a.id() != element.id())
                    .filter_map(ElementRef::wrap)
                    .any(|a| matches!(a.value().name(), "script" | "style"));
                if inside_code {
                    continue;
                }
                text.push_str(t);
                if inside_link {
                    link_text.push(' ');
                    link_text.push_str(t);
                }
            }
            Node::Element(e) if e.name() == "br" => text.push(' '),
            _ => {}
        }
    }
    (normalize_whitespace(&text), count_words(&link_text))
}

fn looks_binary(input: &str) -> bool {
    let control = input
        .chars()
        .filter(|c| c.is_control() && !c.is_whitespace())
        .count();
    input.contains('\0') || control * 20 > input.chars().count().max(1)
}

fn has_markup(input: &str) -> bool {
    input
        .as_bytes()
        .windows(2)
        .any(|w| w[0] == b'<' && (w[1].is_ascii_alphabetic() || w[1] == b'!'))
}

/// Extract from raw bytes, rejecting input that is not UTF-8 text.
pub fn extract_article_bytes(
    bytes: &[u8],
    config: &ExtractionConfig,
) -> Result<Article, ExtractionError> {
    let html = std::str::from_utf8(bytes)
        .map_err(|e| ExtractionError::MalformedInput(format!("not UTF-8: {e}")))?;
    extract_article(html, config)
}

pub fn extract_article(html: &str, config: &ExtractionConfig) -> Result<Article, ExtractionError> {
    config.validate()?;
    if looks_binary(html) {
        return Err(ExtractionError::MalformedInput("binary content".into()));
    }
    if !has_markup(html) {
        return Err(ExtractionError::MalformedInput("no markup found".into()));
    }

    let document = Html::parse_document(html);
    let mut blocks = Vec::new();
    let mut headings = Vec::new();
    for (order, node) in document.root_element().descendants().enumerate() {
        let Some(element) = ElementRef::wrap(node) else {
            continue;
        };
        let name = element.value().name();
        let level = match name {
            "p" => 0,
            "h1" => 1,
            "h2" => 2,
            "h3" => 3,
            _ => continue,
        };
        if in_furniture(&element) {
            continue;
        }
        let (text, link_words) = block_text(&element);
        let words = count_words(&text);
        if words == 0 {
            continue;
        }
        if level == 0 {
            blocks.push(Block {
                order,
                parent: element.parent().map(|p| p.id()),
                text,
                words,
                link_words,
            });
        } else {
            headings.push(Heading { order, level, text });
        }
    }

    let content = |b: &Block| (b.link_words as f64) <= config.link_density_max * b.words as f64;

    // Cluster by parent element, remembering first appearance for tie-breaks.
    let mut clusters: Vec<(Option<NodeId>, Vec<&Block>)> = Vec::new();
    let mut slot: HashMap<Option<NodeId>, usize> = HashMap::new();
    for block in blocks.iter().filter(|b| content(b)) {
        let idx = *slot.entry(block.parent).or_insert_with(|| {
            clusters.push((block.parent, Vec::new()));
            clusters.len() - 1
        });
        clusters[idx].1.push(block);
    }
    if clusters.is_empty() {
        return Err(ExtractionError::NoContent);
    }

    let large_exists = clusters
        .iter()
        .any(|(_, c)| c.len() >= config.min_cluster_paragraphs);
    let mut best: Option<(usize, &Vec<&Block>)> = None;
    for (_, cluster) in &clusters {
        if large_exists && cluster.len() < config.min_cluster_paragraphs {
            continue;
        }
        let score: usize = cluster.iter().map(|b| b.words).sum();
        if best.map_or(true, |(s, _)| score > s) {
            best = Some((score, cluster));
        }
    }
    let (_, cluster) = best.expect("at least one eligible cluster");

    let kept: Vec<&str> = cluster
        .iter()
        .filter(|b| b.words >= config.min_paragraph_words)
        .map(|b| b.text.as_str())
        .collect();
    if kept.is_empty() {
        return Err(ExtractionError::NoContent);
    }

    let cluster_start = cluster[0].order;
    let heading = headings
        .iter()
        .filter(|h| h.order < cluster_start)
        .min_by_key(|h| (h.level, std::cmp::Reverse(h.order)))
        .map(|h| h.text.clone());
    let title = heading.or_else(|| document_title(&document));

    Ok(Article::from_paragraphs(kept).with_title(title))
}

fn document_title(document: &Html) -> Option<String> {
    let selector = scraper::Selector::parse("title").expect("static selector");
    document
        .select(&selector)
        .next()
        .map(|t| normalize_whitespace(&t.text().collect::<String>()))
        .filter(|t| !t.is_empty())
}
