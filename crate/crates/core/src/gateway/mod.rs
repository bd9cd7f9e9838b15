//! LLM layer: prompt construction, provider dispatch with retries, and
//! per-fallacy chat sessions.

mod chat;
pub mod mock;
mod openai;
mod prompt;
mod provider;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

pub use chat::{chat_turn, ChatContext, ChatRole, ChatSession, ChatTurn};
pub use mock::{default_rules, MockProvider, MockRule, MOCK_PROVIDER_ID};
pub use openai::{OpenAiProvider, DEFAULT_BASE_URL};
pub use prompt::{
    build_detection_prompt, build_detection_prompt_capped, build_regeneration_prompt,
    embedded_definitions, embedded_sentences, embedded_title, DetectionPrompt,
    DEFAULT_SENTENCE_CAP, SENTENCES_MARKER, TITLE_MARKER,
};
pub use provider::{CompletionProvider, CompletionRequest, Message, ProviderError, Role};

pub const DETECTION_TEMPERATURE: f64 = 0.0;
pub const CHAT_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("article has no sentences")]
    EmptyArticle,
    #[error("fallacy registry is empty")]
    EmptyRegistry,
    #[error("unknown fallacy code {0}")]
    UnknownCode(String),
    #[error("provider {provider} unavailable: {reason}")]
    ProviderUnavailable { provider: String, reason: String },
    #[error("provider {0} timed out")]
    Timeout(String),
    #[error("provider {provider} rejected credentials: {reason}")]
    AuthFailure { provider: String, reason: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub provider_id: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_retries: u32,
    /// Per-attempt timeout in milliseconds.
    pub timeout_ms: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            provider_id: mock::MOCK_PROVIDER_ID.to_string(),
            model_name: "mock-1".to_string(),
            temperature: DETECTION_TEMPERATURE,
            max_retries: 2,
            timeout_ms: 60_000,
        }
    }
}

impl ProviderConfig {
    pub fn new(provider_id: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            provider_id: provider_id.into(),
            model_name: model_name.into(),
            ..Self::default()
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = max_retries;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout_ms = timeout.as_millis() as u64;
        self
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(GatewayError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.timeout_ms == 0 {
            return Err(GatewayError::InvalidRequest("timeout must be positive".into()));
        }
        Ok(())
    }
}

/// Exponential backoff: `base_delay * 2^attempt`, scaled by a random factor
/// in [0.5, 1.0].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { base_delay: Duration::from_millis(500) }
    }
}

impl RetryPolicy {
    pub fn delay_for(&self, attempt: u32) -> Duration {
        let nominal = self.base_delay.saturating_mul(1u32 << attempt.min(16));
        nominal.mul_f64(rand::thread_rng().gen_range(0.5..=1.0))
    }
}

/// Registered providers plus the retry policy applied to every call.
#[derive(Clone, Default)]
pub struct Gateway {
    providers: BTreeMap<String, Arc<dyn CompletionProvider>>,
    retry: RetryPolicy,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("providers", &self.providers.keys().collect::<Vec<_>>())
            .field("retry", &self.retry)
            .finish()
    }
}

impl Gateway {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_provider(mut self, provider: Arc<dyn CompletionProvider>) -> Self {
        self.register(provider);
        self
    }

    pub fn with_retry_policy(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn register(&mut self, provider: Arc<dyn CompletionProvider>) {
        self.providers.insert(provider.id().to_string(), provider);
    }

    pub fn provider(&self, id: &str) -> Option<&Arc<dyn CompletionProvider>> {
        self.providers.get(id)
    }

    /// Send a detection prompt as a single user message.
    pub async fn complete(
        &self,
        prompt: &DetectionPrompt,
        config: &ProviderConfig,
    ) -> Result<String, GatewayError> {
        self.send(vec![Message::user(prompt.text.clone())], config).await
    }

    /// Dispatch `messages` to the configured provider, retrying transport
    /// failures and timeouts up to `max_retries` times.
    pub async fn send(
        &self,
        messages: Vec<Message>,
        config: &ProviderConfig,
    ) -> Result<String, GatewayError> {
        config.validate()?;
        let provider = self.providers.get(&config.provider_id).ok_or_else(|| {
            GatewayError::ProviderUnavailable {
                provider: config.provider_id.clone(),
                reason: "provider is not registered".into(),
            }
        })?;
        let request = CompletionRequest {
            model: config.model_name.clone(),
            temperature: config.temperature,
            timeout: config.timeout(),
            messages,
        };

        let mut attempt = 0u32;
        loop {
            let outcome = match tokio::time::timeout(request.timeout, provider.complete(&request)).await {
                Ok(result) => result,
                Err(_) => Err(ProviderError::Timeout),
            };
            match outcome {
                Ok(text) => return Ok(text),
                Err(err) if err.is_retryable() && attempt < config.max_retries => {
                    let delay = self.retry.delay_for(attempt);
                    warn!(provider = %config.provider_id, attempt, ?delay, error = %err, "retrying completion");
                    tokio::time::sleep(delay).await;
                    attempt += 1;
                }
                Err(err) => {
                    debug!(provider = %config.provider_id, attempt, error = %err, "completion failed");
                    return Err(map_error(&config.provider_id, err));
                }
            }
        }
    }
}

fn map_error(provider: &str, err: ProviderError) -> GatewayError {
    let provider = provider.to_string();
    match err {
        ProviderError::Timeout => GatewayError::Timeout(provider),
        ProviderError::Auth(reason) => GatewayError::AuthFailure { provider, reason },
        ProviderError::Transport(reason) | ProviderError::Rejected(reason) => {
            GatewayError::ProviderUnavailable { provider, reason }
        }
    }
}
