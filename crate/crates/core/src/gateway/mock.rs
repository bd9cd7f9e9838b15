//! Deterministic offline provider.
//!
//! Detection requests are answered by scanning the sentences embedded in the
//! prompt for trigger phrases (case-insensitive substring match). Every rule
//! whose code has a definition block in the prompt and whose trigger occurs
//! in a sentence flags that sentence. The response is a fenced JSON document
//! in the detection schema with all three levels filled and a Google search
//! link on L1.
//!
//! Chat requests (those carrying a system message) get a reply built from the
//! fallacy named in the preamble and the latest user message.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use async_trait::async_trait;
use serde_json::{json, Map, Value};

use super::prompt::{embedded_definitions, embedded_sentences, embedded_title};
use super::provider::{CompletionProvider, CompletionRequest, ProviderError, Role};

pub const MOCK_PROVIDER_ID: &str = "mock";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockRule {
    pub trigger: String,
    pub code: String,
}

impl MockRule {
    pub fn new(trigger: impl Into<String>, code: impl Into<String>) -> Self {
        Self { trigger: trigger.into(), code: code.into() }
    }
}

/// Trigger phrases for the nine built-in codes.
pub fn default_rules() -> Vec<MockRule> {
    [
        ("trust me", "EBP"),
        ("wants to abolish all", "ST"),
        ("but what about", "RH"),
        ("only the data from", "CP"),
        ("is just like", "FA"),
        ("all of them are", "HG"),
        ("ever since", "PH"),
        ("which proves that", "FC"),
        ("make things better", "VAG"),
    ]
    .into_iter()
    .map(|(t, c)| MockRule::new(t, c))
    .collect()
}

#[derive(Debug)]
pub struct MockProvider {
    id: String,
    rules: Vec<MockRule>,
    calls: AtomicUsize,
}

impl Default for MockProvider {
    fn default() -> Self {
        Self::new(default_rules())
    }
}

impl MockProvider {
    pub fn new(rules: Vec<MockRule>) -> Self {
        Self { id: MOCK_PROVIDER_ID.to_string(), rules, calls: AtomicUsize::new(0) }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn rules(&self) -> &[MockRule] {
        &self.rules
    }

    /// Number of completions served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// `code -> flagged sentence indices` for the given sentences, restricted
    /// to `allowed` codes and ordered as `allowed`.
    pub fn detect(&self, sentences: &[(usize, String)], allowed: &[String]) -> Vec<(String, Vec<usize>)> {
        let mut hits: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (index, text) in sentences {
            let lower = text.to_lowercase();
            for rule in &self.rules {
                if lower.contains(&rule.trigger.to_lowercase()) {
                    let list = hits.entry(rule.code.as_str()).or_default();
                    if !list.contains(index) {
                        list.push(*index);
                    }
                }
            }
        }
        allowed
            .iter()
            .filter_map(|code| {
                hits.get(code.as_str()).map(|idx| {
                    let mut idx = idx.clone();
                    idx.sort_unstable();
                    (code.clone(), idx)
                })
            })
            .collect()
    }

    fn trigger_for(&self, code: &str) -> &str {
        self.rules
            .iter()
            .find(|r| r.code == code)
            .map_or("", |r| r.trigger.as_str())
    }

    fn detection_response(&self, prompt: &str) -> String {
        let definitions = embedded_definitions(prompt);
        let names: BTreeMap<&str, &str> = definitions
            .iter()
            .map(|(name, code)| (code.as_str(), name.as_str()))
            .collect();
        let allowed: Vec<String> = definitions.iter().map(|(_, c)| c.clone()).collect();
        let sentences = embedded_sentences(prompt);
        let detected = self.detect(&sentences, &allowed);

        let mut sentence_map = Map::new();
        for (index, text) in &sentences {
            sentence_map.insert(index.to_string(), Value::String(text.clone()));
        }
        let mut code_sentences = Map::new();
        let mut annotations = Map::new();
        for (code, indices) in &detected {
            let name = names.get(code.as_str()).copied().unwrap_or(code);
            let trigger = self.trigger_for(code);
            let listed = indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ");
            let query: String =
                url::form_urlencoded::byte_serialize(format!("{name} evidence against {trigger}").as_bytes())
                    .collect();
            code_sentences.insert(code.clone(), json!(indices));
            annotations.insert(
                code.clone(),
                json!({
                    "L1": [{
                        "explanation": format!("Sentence {listed} uses \"{trigger}\", a pattern associated with {name}."),
                        "sentence": indices,
                        "link": format!("https://www.google.com/search?q={query}"),
                    }],
                    "L2": [{
                        "explanation": format!("Check whether independent evidence supports the claim in sentence {listed} before accepting it."),
                        "sentence": indices,
                    }],
                    "L3": [{
                        "explanation": format!("Arguments built on {name} often reappear; look for the same pattern in related coverage."),
                        "sentence": indices,
                    }],
                }),
            );
        }
        let document = json!({
            "cases": [{
                "name": embedded_title(prompt).unwrap_or_default(),
                "source": "mock",
                "sentences": sentence_map,
                "fallacies": {
                    "logical_fallacies": detected.iter().map(|(c, _)| c.clone()).collect::<Vec<_>>(),
                    "sentences": code_sentences,
                    "annotations": annotations,
                }
            }]
        });
        format!(
            "```json\n{}\n```",
            serde_json::to_string_pretty(&document).expect("json value serializes")
        )
    }

    fn chat_response(&self, request: &CompletionRequest) -> String {
        let preamble = &request.messages[0].content;
        let fallacy = preamble
            .lines()
            .find_map(|l| l.strip_prefix("Fallacy: "))
            .unwrap_or("this fallacy");
        let question = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map_or("", |m| m.content.as_str());
        let turn = request.messages.iter().filter(|m| m.role == Role::User).count();
        format!(
            "Reply {turn} on {fallacy}: you asked \"{question}\". Compare the flagged sentences with sources that take the opposite view before drawing a conclusion."
        )
    }
}

#[async_trait]
impl CompletionProvider for MockProvider {
    fn id(&self) -> &str {
        &self.id
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let first = request
            .messages
            .first()
            .ok_or_else(|| ProviderError::Rejected("no messages".into()))?;
        if first.role == Role::System {
            Ok(self.chat_response(request))
        } else {
            Ok(self.detection_response(&first.content))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::Article;
    use crate::gateway::{build_detection_prompt, build_regeneration_prompt, Gateway, ProviderConfig};
    use crate::taxonomy::registry_default;
    use std::sync::Arc;

    fn article() -> Article {
        Article::from_paragraphs([
            "The mayor spoke on Monday. Trust me, the plan works. Crime fell ever since the cameras went up.",
            "Only the data from March was shown. Nothing else happened.",
        ])
    }

    #[test]
    fn rule_table_applied_by_hand() {
        // sentence 2 -> EBP ("trust me"), 3 -> PH ("ever since"), 4 -> CP.
        let sentences: Vec<(usize, String)> = article()
            .sentences()
            .iter()
            .map(|s| (s.index, s.text.clone()))
            .collect();
        let allowed: Vec<String> = registry_default().entries().iter().map(|e| e.code.clone()).collect();
        let found = MockProvider::default().detect(&sentences, &allowed);
        assert_eq!(
            found,
            vec![
                ("EBP".to_string(), vec![2]),
                ("CP".to_string(), vec![4]),
                ("PH".to_string(), vec![3]),
            ]
        );
    }

    #[tokio::test]
    async fn response_is_deterministic_and_counted() {
        let mock = Arc::new(MockProvider::default());
        let gw = Gateway::new().with_provider(mock.clone());
        let prompt = build_detection_prompt(&article(), &registry_default()).unwrap();
        let cfg = ProviderConfig::default();
        let a = gw.complete(&prompt, &cfg).await.unwrap();
        let b = gw.complete(&prompt, &cfg).await.unwrap();
        assert_eq!(a, b);
        assert_eq!(mock.calls(), 2);
        assert!(a.starts_with("```json"));
        assert!(a.contains("\"CP\""));
    }

    #[tokio::test]
    async fn regeneration_only_emits_requested_code() {
        let gw = Gateway::new().with_provider(Arc::new(MockProvider::default()));
        let prompt = build_regeneration_prompt(&article(), &registry_default(), "CP").unwrap();
        let text = gw.complete(&prompt, &ProviderConfig::default()).await.unwrap();
        assert!(text.contains("\"CP\""));
        assert!(!text.contains("\"EBP\""));
        assert!(!text.contains("\"PH\""));
    }
}
