//! Service configuration: an optional TOML file overlaid by `SKEPTIK_*`
//! environment variables. Provider credentials are read from the
//! environment only and never appear in the config file or its serialized
//! form.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! allowed_origins = ["https://news.example.com"]
//! cache_dir = "/var/cache/skeptik"
//! registry_path = "fallacies.toml"
//! parse_mode = "lenient"
//! chat_temperature = 0.7
//!
//! [provider]
//! id = "openai"
//! model = "gpt-4o"
//! temperature = 0.0
//! max_retries = 2
//! timeout_ms = 60000
//! base_url = "https://api.openai.com/v1"
//! ```

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use skeptik_core::analysis::ParseMode;
use skeptik_core::gateway::{ProviderConfig, CHAT_TEMPERATURE, DEFAULT_BASE_URL};
use thiserror::Error;

pub const ENV_PROVIDER: &str = "SKEPTIK_PROVIDER";
pub const ENV_API_KEY: &str = "SKEPTIK_API_KEY";
pub const ENV_MODEL: &str = "SKEPTIK_MODEL";
pub const ENV_TEMPERATURE: &str = "SKEPTIK_TEMPERATURE";
pub const ENV_CACHE_DIR: &str = "SKEPTIK_CACHE_DIR";
/// Shared secret the browser extension sends in [`TOKEN_HEADER`].
pub const ENV_EXTENSION_TOKEN: &str = "SKEPTIK_EXTENSION_TOKEN";
pub const TOKEN_HEADER: &str = "x-skeptik-token";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderSettings {
    pub id: String,
    pub model: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_ms: u64,
    pub base_url: String,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        let cfg = ProviderConfig::default();
        Self {
            id: cfg.provider_id,
            model: cfg.model_name,
            temperature: cfg.temperature,
            max_retries: cfg.max_retries,
            timeout_ms: cfg.timeout_ms,
            base_url: DEFAULT_BASE_URL.to_string(),
        }
    }
}

impl ProviderSettings {
    pub fn provider_config(&self) -> ProviderConfig {
        ProviderConfig::new(&self.id, &self.model)
            .with_temperature(self.temperature)
            .with_max_retries(self.max_retries)
            .with_timeout(Duration::from_millis(self.timeout_ms))
    }
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen: String,
    pub provider: ProviderSettings,
    pub allowed_origins: Vec<String>,
    pub cache_dir: PathBuf,
    pub registry_path: Option<PathBuf>,
    pub parse_mode: ParseMode,
    pub chat_temperature: f64,
    /// Permit plain-HTTP article URLs. Meant for local testing.
    pub allow_http_fetch: bool,
    /// Expose `GET /api/session/{id}`; off in normal deployments.
    pub expose_sessions: bool,
    #[serde(skip)]
    pub extension_token: Option<String>,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl std::fmt::Debug for ServiceConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let redacted = |v: &Option<String>| v.as_ref().map(|_| "<redacted>");
        f.debug_struct("ServiceConfig")
            .field("listen", &self.listen)
            .field("provider", &self.provider)
            .field("allowed_origins", &self.allowed_origins)
            .field("cache_dir", &self.cache_dir)
            .field("registry_path", &self.registry_path)
            .field("parse_mode", &self.parse_mode)
            .field("chat_temperature", &self.chat_temperature)
            .field("allow_http_fetch", &self.allow_http_fetch)
            .field("expose_sessions", &self.expose_sessions)
            .field("extension_token", &redacted(&self.extension_token))
            .field("api_key", &redacted(&self.api_key))
            .finish()
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            provider: ProviderSettings::default(),
            allowed_origins: Vec::new(),
            cache_dir: std::env::temp_dir().join("skeptik-cache"),
            registry_path: None,
            parse_mode: ParseMode::Lenient,
            chat_temperature: CHAT_TEMPERATURE,
            allow_http_fetch: false,
            expose_sessions: false,
            extension_token: None,
            api_key: None,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut config = Self::from_toml_str(&text)?;
        if let Some(registry) = &config.registry_path {
            if registry.is_relative() {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                config.registry_path = Some(base.join(registry));
            }
        }
        Ok(config)
    }

    /// Apply `SKEPTIK_*` variables from `env`.
    pub fn apply_env(&mut self, env: &HashMap<String, String>) -> Result<(), ConfigError> {
        let get = |k: &str| env.get(k).map(|v| v.trim()).filter(|v| !v.is_empty());
        if let Some(v) = get(ENV_PROVIDER) {
            self.provider.id = v.to_string();
        }
        if let Some(v) = get(ENV_MODEL) {
            self.provider.model = v.to_string();
        }
        if let Some(v) = get(ENV_TEMPERATURE) {
            self.provider.temperature = v
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{ENV_TEMPERATURE} is not a number")))?;
        }
        if let Some(v) = get(ENV_CACHE_DIR) {
            self.cache_dir = PathBuf::from(v);
        }
        self.api_key = get(ENV_API_KEY).map(str::to_string);
        if let Some(v) = get(ENV_EXTENSION_TOKEN) {
            self.extension_token = Some(v.to_string());
        }
        Ok(())
    }

    pub fn apply_process_env(&mut self) -> Result<(), ConfigError> {
        let env: HashMap<String, String> = std::env::vars().filter(|(k, _)| k.starts_with("SKEPTIK_")).collect();
        self.apply_env(&env)
    }

    pub fn listen_addr(&self) -> Result<SocketAddr, ConfigError> {
        self.listen
            .parse()
            .map_err(|_| ConfigError::Invalid(format!("listen address {:?} is not host:port", self.listen)))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.listen_addr()?;
        self.provider_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.chat_temperature >= 0.0) {
            return Err(ConfigError::Invalid("chat_temperature must be >= 0".into()));
        }
        Ok(())
    }

    pub fn provider_config(&self) -> ProviderConfig {
        self.provider.provider_config()
    }

    pub fn chat_config(&self) -> ProviderConfig {
        self.provider_config().with_temperature(self.chat_temperature)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_use_mock() {
        let c = ServiceConfig::default();
        assert_eq!(c.provider.id, "mock");
        assert_eq!(c.provider_config().temperature, 0.0);
        assert_eq!(c.chat_config().temperature, CHAT_TEMPERATURE);
        c.validate().unwrap();
    }

    #[test]
    fn toml_and_env_overlay() {
        let mut c = ServiceConfig::from_toml_str(
            "listen = \"0.0.0.0:9000\"\nparse_mode = \"strict\"\n[provider]\nid = \"openai\"\nmodel = \"m1\"\n",
        )
        .unwrap();
        assert_eq!(c.parse_mode, ParseMode::Strict);
        let env: HashMap<String, String> = [
            (ENV_MODEL, "m2"),
            (ENV_TEMPERATURE, "0.3"),
            (ENV_API_KEY, "sk-secret"),
            (ENV_CACHE_DIR, "/tmp/x"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        c.apply_env(&env).unwrap();
        assert_eq!(c.provider.model, "m2");
        assert_eq!(c.provider.temperature, 0.3);
        assert_eq!(c.cache_dir, PathBuf::from("/tmp/x"));
        assert_eq!(c.api_key.as_deref(), Some("sk-secret"));
        let dumped = toml::to_string(&c).unwrap();
        assert!(!dumped.contains("sk-secret"));
        assert!(!format!("{c:?}").contains("sk-secret"));
    }

    #[test]
    fn api_key_not_read_from_file() {
        let c = ServiceConfig::from_toml_str("api_key = \"nope\"\n").unwrap();
        assert_eq!(c.api_key, None);
    }

    #[test]
    fn invalid_values() {
        let c = ServiceConfig { listen: "nowhere".into(), ..ServiceConfig::default() };
        assert!(c.validate().is_err());
        let mut c = ServiceConfig::default();
        let env = HashMap::from([(ENV_TEMPERATURE.to_string(), "hot".to_string())]);
        assert!(c.apply_env(&env).is_err());
    }
}
