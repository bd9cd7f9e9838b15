//! Detection and regeneration prompts.

use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::extraction::Article;
use crate::taxonomy::{FallacyRegistry, FallacyType};

/// Sentences beyond this count are left out of a single detection prompt.
pub const DEFAULT_SENTENCE_CAP: usize = 200;

/// Line that introduces the numbered article sentences.
pub const SENTENCES_MARKER: &str = "Article sentences:";
pub const TITLE_MARKER: &str = "Article title:";

const PREAMBLE: &str =
    "You are an expert skilled in detecting logical fallacies and explaining why these fallacies occur.";

const TASK: &str = "Please state all logical fallacies that are present in the text from this list. Explain where the fallacy occurs and why.";

const OUTPUT_TEMPLATE: &str = r#"Output a JSON (example):
{"cases": [{
"name": "Title",
"source": "WSJ",
"sentences": {"1": "sentence 1", "2": "sentence 2"},
"fallacies": {
    "logical_fallacies": ["CP", "RH"],
    "sentences": {
        "CP": [4, 5, 10],
        "RH": [17, 18]},
    "annotations": {
        "CP": {
            "L1": [{
                "explanation": "insert explanation here",
                "sentence": [4, 5],
                "link": "URL"}],
            "L2": [{
                "explanation": "insert explanation here",
                "sentence": [4, 5]}],
            "L3": [{
                "explanation": "insert explanation here",
                "sentence": [4, 5]}]
        }
    }
}}]}"#;

const LEVELS: &str = "Level 1 (L1) focuses on immediate correction, Level 2 (L2) provides a detailed analysis with evidence, and Level 3 (L3) aims to preemptively inform and educate the reader about potential misinformation. All explanations should be filled.";

const LINK_RULES: &str = "Each explanation should:
Be supported by specific examples and evidence from reputable sources. Incorporate at least one outbound link to Google or Bing that offers a contrasting viewpoint or additional data if appropriate. Please only use Google or Bing, replacing the query with a contrasting idea. For example, if you suggest looking at examples where \"the earth is not flat\" then provide the link https://www.google.com/search?q=the+earth+is+not+flat
Output in JSON code environment.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionPrompt {
    pub text: String,
    pub registry_version: String,
    /// Number of article sentences embedded in the prompt.
    pub article_sentence_count: usize,
    /// Codes the response may use, in registry order.
    pub codes: Vec<String>,
}

fn definition_block(entry: &FallacyType) -> String {
    format!(
        "{} ({}): {}\nExample: {}",
        entry.name, entry.code, entry.definition, entry.example
    )
}

fn render(
    article: &Article,
    entries: &[&FallacyType],
    registry_version: &str,
    task: &str,
    sentence_cap: usize,
) -> DetectionPrompt {
    let count = entries.len();
    let header = if count == 1 {
        format!("{PREAMBLE} Here is 1 fallacy.")
    } else {
        format!("{PREAMBLE} Here are {count} fallacies.")
    };
    let mut text = header;
    text.push_str("\n\n");
    for entry in entries {
        text.push_str(&definition_block(entry));
        text.push_str("\n\n");
    }
    text.push_str(task);
    text.push_str("\n\n");
    text.push_str(OUTPUT_TEMPLATE);
    text.push('\n');
    text.push_str(LEVELS);
    text.push_str("\n\n");
    text.push_str(LINK_RULES);
    text.push_str("\n\n");
    if let Some(title) = &article.title {
        text.push_str(&format!("{TITLE_MARKER} {title}\n"));
    }
    text.push_str(SENTENCES_MARKER);
    text.push('\n');
    let included = article.sentence_count().min(sentence_cap);
    for sentence in &article.sentences()[..included] {
        text.push_str(&format!("{}: {}\n", sentence.index, sentence.text));
    }
    DetectionPrompt {
        text,
        registry_version: registry_version.to_string(),
        article_sentence_count: included,
        codes: entries.iter().map(|e| e.code.clone()).collect(),
    }
}

fn check_inputs(article: &Article, registry: &FallacyRegistry) -> Result<(), GatewayError> {
    if article.sentence_count() == 0 {
        return Err(GatewayError::EmptyArticle);
    }
    if registry.is_empty() {
        return Err(GatewayError::EmptyRegistry);
    }
    Ok(())
}

pub fn build_detection_prompt(
    article: &Article,
    registry: &FallacyRegistry,
) -> Result<DetectionPrompt, GatewayError> {
    build_detection_prompt_capped(article, registry, DEFAULT_SENTENCE_CAP)
}

pub fn build_detection_prompt_capped(
    article: &Article,
    registry: &FallacyRegistry,
    sentence_cap: usize,
) -> Result<DetectionPrompt, GatewayError> {
    check_inputs(article, registry)?;
    let entries: Vec<&FallacyType> = registry.entries().iter().collect();
    Ok(render(article, &entries, registry.version(), TASK, sentence_cap.max(1)))
}

/// Prompt that re-examines the article for a single fallacy.
pub fn build_regeneration_prompt(
    article: &Article,
    registry: &FallacyRegistry,
    fallacy_code: &str,
) -> Result<DetectionPrompt, GatewayError> {
    check_inputs(article, registry)?;
    let entry = registry
        .get(fallacy_code)
        .ok_or_else(|| GatewayError::UnknownCode(fallacy_code.to_string()))?;
    let task = format!(
        "Re-examine the text only for {} ({}). State where it occurs and why, and write fresh explanations for every level. Use no other fallacy code.",
        entry.name, entry.code
    );
    Ok(render(
        article,
        &[entry],
        registry.version(),
        &task,
        DEFAULT_SENTENCE_CAP,
    ))
}

/// Numbered sentences embedded after [`SENTENCES_MARKER`].
pub fn embedded_sentences(prompt: &str) -> Vec<(usize, String)> {
    let Some(start) = prompt.find(SENTENCES_MARKER) else {
        return Vec::new();
    };
    prompt[start + SENTENCES_MARKER.len()..]
        .lines()
        .filter_map(|line| {
            let (num, text) = line.split_once(": ")?;
            Some((num.trim().parse().ok()?, text.to_string()))
        })
        .collect()
}

/// `(name, code)` pairs of the definition blocks in a prompt.
pub fn embedded_definitions(prompt: &str) -> Vec<(String, String)> {
    let body = prompt.split(OUTPUT_TEMPLATE).next().unwrap_or(prompt);
    body.lines()
        .filter_map(|line| {
            let (head, _) = line.split_once("): ")?;
            let (name, code) = head.rsplit_once(" (")?;
            let valid = !code.is_empty()
                && code.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit());
            valid.then(|| (name.to_string(), code.to_string()))
        })
        .collect()
}

pub fn embedded_title(prompt: &str) -> Option<String> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix(TITLE_MARKER))
        .map(|t| t.trim().to_string())
}
