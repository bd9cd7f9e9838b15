//! Extraction, prompting, completion and validation composed into one call.

use std::sync::Arc;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use thiserror::Error;
use tracing::{debug, warn};

use super::links::sanitize_links;
use super::parse::{parse_response, ParseError, ParseMode, ParseOptions, ParseWarning};
use super::{AnalysisResult, ArticleRef, FallacyInstance};
use crate::extraction::{article_from_text, extract_article_bytes, Article, ExtractionConfig, ExtractionError};
use crate::gateway::{
    build_detection_prompt_capped, build_regeneration_prompt, DetectionPrompt, Gateway, GatewayError,
    ProviderConfig, DEFAULT_SENTENCE_CAP,
};
use crate::taxonomy::FallacyRegistry;

/// Re-asks after an unparseable response; three attempts in total.
pub const DEFAULT_PARSE_RETRIES: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnalysisInput {
    Url(String),
    Html { html: String, url: Option<String> },
    Text { text: String, url: Option<String> },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FetchError {
    #[error("invalid URL: {0}")]
    InvalidUrl(String),
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("response exceeds {0} bytes")]
    TooLarge(usize),
    #[error("fetch timed out")]
    Timeout,
    #[error("fetch failed: {0}")]
    Transport(String),
}

#[async_trait]
pub trait PageFetcher: Send + Sync {
    async fn fetch(&self, url: &str) -> Result<Vec<u8>, FetchError>;
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("input is empty")]
    EmptyInput,
    #[error("no page fetcher configured for URL input")]
    NoFetcher,
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("analysis failed after {attempts} attempts: {last}")]
    AnalysisFailed { attempts: u32, last: ParseError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub article: Article,
    pub result: AnalysisResult,
    pub warnings: Vec<ParseWarning>,
}

#[derive(Clone)]
pub struct Analyzer {
    gateway: Gateway,
    extraction: ExtractionConfig,
    parse_retries: u32,
    sentence_cap: usize,
    fetcher: Option<Arc<dyn PageFetcher>>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for Analyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Analyzer")
            .field("gateway", &self.gateway)
            .field("extraction", &self.extraction)
            .field("parse_retries", &self.parse_retries)
            .field("sentence_cap", &self.sentence_cap)
            .field("fetcher", &self.fetcher.is_some())
            .finish()
    }
}

impl Analyzer {
    pub fn new(gateway: Gateway) -> Self {
        Self {
            gateway,
            extraction: ExtractionConfig::default(),
            parse_retries: DEFAULT_PARSE_RETRIES,
            sentence_cap: DEFAULT_SENTENCE_CAP,
            fetcher: None,
            clock: Arc::new(SystemClock),
        }
    }

    pub fn with_extraction(mut self, config: ExtractionConfig) -> Self {
        self.extraction = config;
        self
    }

    pub fn with_parse_retries(mut self, retries: u32) -> Self {
        self.parse_retries = retries;
        self
    }

    pub fn with_sentence_cap(mut self, cap: usize) -> Self {
        self.sentence_cap = cap.max(1);
        self
    }

    pub fn with_fetcher(mut self, fetcher: Arc<dyn PageFetcher>) -> Self {
        self.fetcher = Some(fetcher);
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn parse_retries(&self) -> u32 {
        self.parse_retries
    }

    /// Resolve any input form to an article.
    pub async fn extract(&self, input: &AnalysisInput) -> Result<Article, AnalysisError> {
        let article = match input {
            AnalysisInput::Url(url) => {
                if url.trim().is_empty() {
                    return Err(AnalysisError::EmptyInput);
                }
                let fetcher = self.fetcher.as_ref().ok_or(AnalysisError::NoFetcher)?;
                let bytes = fetcher.fetch(url).await?;
                extract_article_bytes(&bytes, &self.extraction)?.with_source_url(Some(url.clone()))
            }
            AnalysisInput::Html { html, url } => {
                if html.trim().is_empty() {
                    return Err(AnalysisError::EmptyInput);
                }
                extract_article_bytes(html.as_bytes(), &self.extraction)?.with_source_url(url.clone())
            }
            AnalysisInput::Text { text, url } => {
                if text.trim().is_empty() {
                    return Err(AnalysisError::EmptyInput);
                }
                article_from_text(text)?.with_source_url(url.clone())
            }
        };
        Ok(article)
    }

    pub async fn analyze(
        &self,
        input: &AnalysisInput,
        registry: &FallacyRegistry,
        config: &ProviderConfig,
        mode: ParseMode,
    ) -> Result<Analysis, AnalysisError> {
        let article = self.extract(input).await?;
        self.analyze_article(article, registry, config, mode).await
    }

    pub async fn analyze_article(
        &self,
        article: Article,
        registry: &FallacyRegistry,
        config: &ProviderConfig,
        mode: ParseMode,
    ) -> Result<Analysis, AnalysisError> {
        let prompt = build_detection_prompt_capped(&article, registry, self.sentence_cap)?;
        if prompt.article_sentence_count < article.sentence_count() {
            warn!(
                sentences = article.sentence_count(),
                cap = self.sentence_cap,
                "article truncated to the sentence cap"
            );
        }
        let (raw, parsed) = self.complete_and_parse(&prompt, registry, config, mode, None).await?;
        let mut result = parsed.result;
        result.article_ref = ArticleRef::for_article(&article);
        result.sentences = article.sentences().iter().map(|s| s.text.clone()).collect();
        if let Some(title) = article.title.as_ref().filter(|t| !t.trim().is_empty()) {
            result.title = title.clone();
        }
        if let Some(host) = article
            .source_url
            .as_deref()
            .and_then(|u| url::Url::parse(u).ok())
            .and_then(|u| u.host_str().map(str::to_string))
        {
            result.source = host;
        }
        result.created_at = self.clock.now();
        result.raw_response = raw;
        Ok(Analysis { article, result: sanitize_links(result), warnings: parsed.warnings })
    }

    /// Ask again for one fallacy only. `Ok(None)` when the model no longer
    /// flags it.
    pub async fn regenerate(
        &self,
        article: &Article,
        registry: &FallacyRegistry,
        code: &str,
        config: &ProviderConfig,
        mode: ParseMode,
    ) -> Result<Option<FallacyInstance>, AnalysisError> {
        let prompt = build_regeneration_prompt(article, registry, code)?;
        let allowed = vec![code.to_string()];
        let (_, parsed) = self
            .complete_and_parse(&prompt, registry, config, mode, Some(&allowed))
            .await?;
        let mut result = parsed.result;
        result.detected.retain(|i| i.code == code);
        Ok(sanitize_links(result).detected.into_iter().next())
    }

    async fn complete_and_parse(
        &self,
        prompt: &DetectionPrompt,
        registry: &FallacyRegistry,
        config: &ProviderConfig,
        mode: ParseMode,
        allowed_codes: Option<&[String]>,
    ) -> Result<(String, super::Parsed), AnalysisError> {
        let options = ParseOptions {
            registry,
            sentence_count: prompt.article_sentence_count,
            mode,
            allowed_codes,
        };
        let attempts = self.parse_retries + 1;
        let mut last = None;
        for attempt in 1..=attempts {
            let raw = self.gateway.complete(prompt, config).await?;
            match parse_response(&raw, &options) {
                Ok(parsed) => {
                    debug!(attempt, detected = parsed.result.detected.len(), "response parsed");
                    return Ok((raw, parsed));
                }
                Err(err) => {
                    warn!(attempt, error = %err, "unusable model response");
                    last = Some(err);
                }
            }
        }
        Err(AnalysisError::AnalysisFailed {
            attempts,
            last: last.expect("at least one attempt"),
        })
    }
}
