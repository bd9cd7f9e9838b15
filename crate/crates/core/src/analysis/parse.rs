//! Validation of model responses against the detection schema.
//!
//! Both modes apply the same per-instance rules; they differ only in what
//! happens to a violation. Strict mode returns it as an error. Lenient mode
//! records a warning and drops the offending instance (or case), so the
//! instances that survive are exactly those strict mode would accept.
//!
//! An instance is valid when its code is in the registry (and in the allowed
//! subset, if any), its sentence list is a non-empty list of integers in
//! `1..=sentence_count`, and its annotation block, when present, holds
//! exactly one entry for each of L1, L2 and L3 with a string explanation and
//! in-range sentence span. Duplicate codes merge: sentence lists are unioned
//! and the first annotation block wins.

use std::collections::{BTreeSet, HashMap};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::json::{parse_tolerant, Json};
use super::{AnalysisResult, AnnotationLayer, ArticleRef, FallacyInstance, Level};
use crate::taxonomy::FallacyRegistry;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    Strict,
    #[default]
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("schema violation at {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("no valid fallacy instance survived filtering ({} warnings)", warnings.len())]
    EmptyAfterFiltering { warnings: Vec<ParseWarning> },
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions<'a> {
    pub registry: &'a FallacyRegistry,
    pub sentence_count: usize,
    pub mode: ParseMode,
    /// Restrict accepted codes further than the registry does.
    pub allowed_codes: Option<&'a [String]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub result: AnalysisResult,
    pub warnings: Vec<ParseWarning>,
}

/// Parse a raw model response. Fences and surrounding prose are ignored.
pub fn parse_llm_response(
    raw: &str,
    registry: &FallacyRegistry,
    sentence_count: usize,
    mode: ParseMode,
) -> Result<Parsed, ParseError> {
    parse_response(
        raw,
        &ParseOptions { registry, sentence_count, mode, allowed_codes: None },
    )
}

type Violation = (String, String);

fn violation(path: impl Into<String>, reason: impl Into<String>) -> Violation {
    (path.into(), reason.into())
}

struct Checker {
    mode: ParseMode,
    warnings: Vec<ParseWarning>,
    dropped: usize,
}

impl Checker {
    /// Strict: turn the violation into an error. Lenient: log and continue.
    fn reject(&mut self, (path, reason): Violation) -> Result<(), ParseError> {
        match self.mode {
            ParseMode::Strict => Err(ParseError::SchemaViolation { path, reason }),
            ParseMode::Lenient => {
                self.dropped += 1;
                self.warnings.push(ParseWarning { path, message: reason });
                Ok(())
            }
        }
    }

    fn note(&mut self, path: impl Into<String>, message: impl Into<String>) {
        if self.mode == ParseMode::Lenient {
            self.warnings.push(ParseWarning { path: path.into(), message: message.into() });
        }
    }
}

fn fatal(path: &str, reason: &str) -> ParseError {
    ParseError::SchemaViolation { path: path.into(), reason: reason.into() }
}

fn index_list(value: &Json, path: &str, sentence_count: usize) -> Result<Vec<usize>, Violation> {
    let Json::Array(items) = value else {
        return Err(violation(path, format!("expected array, found {}", value.kind())));
    };
    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let at = format!("{path}[{i}]");
        let n = match item {
            Json::Number(n) => n.as_u64(),
            _ => None,
        }
        .ok_or_else(|| violation(&at, "expected a positive integer sentence index"))?;
        if n == 0 || n as usize > sentence_count {
            return Err(violation(
                &at,
                format!("sentence {n} outside 1..={sentence_count}"),
            ));
        }
        out.push(n as usize);
    }
    Ok(out)
}

fn sorted_unique(indices: impl IntoIterator<Item = usize>) -> Vec<usize> {
    indices.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
}

fn parse_layers(
    block: &Json,
    path: &str,
    sentence_count: usize,
    fallback_span: &[usize],
) -> Result<Vec<AnnotationLayer>, Violation> {
    if !matches!(block, Json::Object(_)) {
        return Err(violation(path, format!("expected object, found {}", block.kind())));
    }
    let mut layers = Vec::with_capacity(3);
    for level in Level::ALL {
        let at = format!("{path}.{}", level.key());
        let entries = match block.get(level.key()) {
            Some(Json::Array(entries)) => entries,
            Some(other) => return Err(violation(&at, format!("expected array, found {}", other.kind()))),
            None => return Err(violation(&at, "missing level")),
        };
        if entries.len() != 1 {
            return Err(violation(&at, format!("expected exactly one entry, found {}", entries.len())));
        }
        let entry = &entries[0];
        let at = format!("{at}[0]");
        if !matches!(entry, Json::Object(_)) {
            return Err(violation(&at, format!("expected object, found {}", entry.kind())));
        }
        let explanation = match entry.get("explanation") {
            Some(Json::String(s)) => s.trim().to_string(),
            Some(other) => {
                return Err(violation(format!("{at}.explanation"), format!("expected string, found {}", other.kind())))
            }
            None => return Err(violation(format!("{at}.explanation"), "missing explanation")),
        };
        let sentence_span = match entry.get("sentence") {
            Some(value) => sorted_unique(index_list(value, &format!("{at}.sentence"), sentence_count)?),
            None => fallback_span.to_vec(),
        };
        let link = match entry.get("link") {
            None | Some(Json::Null) => None,
            Some(Json::String(s)) if s.trim().is_empty() => None,
            Some(Json::String(s)) => Some(s.trim().to_string()),
            Some(other) => {
                return Err(violation(format!("{at}.link"), format!("expected string, found {}", other.kind())))
            }
        };
        layers.push(AnnotationLayer { level, explanation, sentence_span, link });
    }
    Ok(layers)
}

/// Instances of one case, in order of first appearance.
fn parse_case(
    case: &Json,
    path: &str,
    opts: &ParseOptions<'_>,
    checker: &mut Checker,
) -> Result<Option<Vec<FallacyInstance>>, ParseError> {
    if !matches!(case, Json::Object(_)) {
        checker.reject(violation(path, format!("expected object, found {}", case.kind())))?;
        return Ok(None);
    }
    let fpath = format!("{path}.fallacies");
    let Some(fallacies) = case.get("fallacies") else {
        checker.reject(violation(&fpath, "missing fallacies object"))?;
        return Ok(None);
    };
    let Json::Object(_) = fallacies else {
        checker.reject(violation(&fpath, format!("expected object, found {}", fallacies.kind())))?;
        return Ok(None);
    };

    let mut order: Vec<String> = Vec::new();
    let push_code = |code: &str, order: &mut Vec<String>| {
        if !order.iter().any(|c| c == code) {
            order.push(code.to_string());
        }
    };

    match fallacies.get("logical_fallacies") {
        None => {}
        Some(Json::Array(codes)) => {
            for (i, code) in codes.iter().enumerate() {
                match code {
                    Json::String(code) => push_code(code.trim(), &mut order),
                    other => checker.reject(violation(
                        format!("{fpath}.logical_fallacies[{i}]"),
                        format!("expected string, found {}", other.kind()),
                    ))?,
                }
            }
        }
        Some(other) => checker.reject(violation(
            format!("{fpath}.logical_fallacies"),
            format!("expected array, found {}", other.kind()),
        ))?,
    }

    let empty = Vec::new();
    let sentence_pairs = match fallacies.get("sentences") {
        None => &empty,
        Some(Json::Object(pairs)) => pairs,
        Some(other) => {
            checker.reject(violation(
                format!("{fpath}.sentences"),
                format!("expected object, found {}", other.kind()),
            ))?;
            &empty
        }
    };
    for (code, _) in sentence_pairs {
        push_code(code.trim(), &mut order);
    }

    let annotation_pairs = match fallacies.get("annotations") {
        None => &empty,
        Some(Json::Object(pairs)) => pairs,
        Some(other) => {
            checker.reject(violation(
                format!("{fpath}.annotations"),
                format!("expected object, found {}", other.kind()),
            ))?;
            &empty
        }
    };
    for (code, _) in annotation_pairs {
        if !order.iter().any(|c| c == code.trim()) {
            checker.reject(violation(
                format!("{fpath}.annotations.{code}"),
                "annotation for a code with no sentences",
            ))?;
        }
    }

    let mut instances = Vec::new();
    for code in order {
        match parse_instance(&code, sentence_pairs, annotation_pairs, &fpath, opts, checker) {
            Ok(instance) => instances.push(instance),
            Err(v) => checker.reject(v)?,
        }
    }
    Ok(Some(instances))
}

fn parse_instance(
    code: &str,
    sentence_pairs: &[(String, Json)],
    annotation_pairs: &[(String, Json)],
    fpath: &str,
    opts: &ParseOptions<'_>,
    checker: &mut Checker,
) -> Result<FallacyInstance, Violation> {
    let known = opts.registry.contains(code)
        && opts.allowed_codes.map_or(true, |allowed| allowed.iter().any(|c| c == code));
    if !known {
        return Err(violation(format!("{fpath}.logical_fallacies"), format!("unknown fallacy code {code:?}")));
    }

    let lists: Vec<&Json> = sentence_pairs
        .iter()
        .filter(|(k, _)| k.trim() == code)
        .map(|(_, v)| v)
        .collect();
    if lists.is_empty() {
        return Err(violation(format!("{fpath}.sentences.{code}"), "no sentence list for listed code"));
    }
    if lists.len() > 1 {
        checker.note(format!("{fpath}.sentences.{code}"), "duplicate code; sentence lists merged");
    }
    let mut indices = Vec::new();
    for list in lists {
        indices.extend(index_list(list, &format!("{fpath}.sentences.{code}"), opts.sentence_count)?);
    }
    let indices = sorted_unique(indices);
    if indices.is_empty() {
        return Err(violation(format!("{fpath}.sentences.{code}"), "empty sentence list"));
    }

    let blocks: Vec<&Json> = annotation_pairs
        .iter()
        .filter(|(k, _)| k.trim() == code)
        .map(|(_, v)| v)
        .collect();
    if blocks.len() > 1 {
        checker.note(format!("{fpath}.annotations.{code}"), "duplicate annotation block; first kept");
    }
    let layers = match blocks.first() {
        Some(block) => parse_layers(block, &format!("{fpath}.annotations.{code}"), opts.sentence_count, &indices)?,
        None => Vec::new(),
    };
    Ok(FallacyInstance { code: code.to_string(), sentence_indices: indices, layers })
}

#[derive(Deserialize)]
struct Metadata {
    article_ref: Option<ArticleRef>,
    created_at: Option<DateTime<Utc>>,
    raw_response: Option<String>,
}

fn to_value(json: &Json) -> serde_json::Value {
    use serde_json::Value;
    match json {
        Json::Null => Value::Null,
        Json::Bool(b) => Value::Bool(*b),
        Json::Number(n) => Value::Number(n.clone()),
        Json::String(s) => Value::String(s.clone()),
        Json::Array(items) => Value::Array(items.iter().map(to_value).collect()),
        Json::Object(pairs) => Value::Object(pairs.iter().map(|(k, v)| (k.clone(), to_value(v))).collect()),
    }
}

fn echoed_sentences(value: &Json, path: &str) -> Result<Vec<String>, Violation> {
    let Json::Object(pairs) = value else {
        return Err(violation(path, format!("expected object, found {}", value.kind())));
    };
    let mut out = Vec::with_capacity(pairs.len());
    for (i, (key, text)) in pairs.iter().enumerate() {
        if key.trim().parse::<usize>().ok() != Some(i + 1) {
            return Err(violation(format!("{path}.{key}"), format!("expected sentence number {}", i + 1)));
        }
        match text {
            Json::String(s) => out.push(s.clone()),
            other => return Err(violation(format!("{path}.{key}"), format!("expected string, found {}", other.kind()))),
        }
    }
    Ok(out)
}

pub fn parse_response(raw: &str, opts: &ParseOptions<'_>) -> Result<Parsed, ParseError> {
    if opts.sentence_count == 0 {
        return Err(fatal("$", "sentence_count must be at least 1"));
    }
    let root = parse_tolerant(raw).map_err(ParseError::MalformedJson)?;
    if !matches!(root, Json::Object(_)) {
        return Err(fatal("$", "expected top-level object"));
    }
    let cases = match root.get("cases") {
        Some(Json::Array(cases)) => cases,
        Some(other) => return Err(fatal("$.cases", &format!("expected array, found {}", other.kind()))),
        None => return Err(fatal("$.cases", "missing cases array")),
    };

    let mut checker = Checker { mode: opts.mode, warnings: Vec::new(), dropped: 0 };
    let mut merged: Vec<FallacyInstance> = Vec::new();
    let mut position: HashMap<String, usize> = HashMap::new();
    for (i, case) in cases.iter().enumerate() {
        let path = format!("$.cases[{i}]");
        let Some(instances) = parse_case(case, &path, opts, &mut checker)? else {
            continue;
        };
        for instance in instances {
            match position.get(&instance.code) {
                Some(&at) => {
                    checker.note(&path, format!("duplicate code {} merged across cases", instance.code));
                    let existing = &mut merged[at];
                    existing.sentence_indices = sorted_unique(
                        existing.sentence_indices.iter().copied().chain(instance.sentence_indices),
                    );
                    if existing.layers.is_empty() {
                        existing.layers = instance.layers;
                    }
                }
                None => {
                    position.insert(instance.code.clone(), merged.len());
                    merged.push(instance);
                }
            }
        }
    }
    if merged.is_empty() && checker.dropped > 0 {
        return Err(ParseError::EmptyAfterFiltering { warnings: checker.warnings });
    }
    merged.sort_by_key(|inst| opts.registry.position(&inst.code).unwrap_or(usize::MAX));

    let first = cases.first();
    let text_field = |key: &str| match first.and_then(|c| c.get(key)) {
        Some(Json::String(s)) => s.clone(),
        _ => String::new(),
    };
    let title = text_field("name");
    let source = text_field("source");
    let mut sentences = Vec::new();
    if let Some(echo) = first.and_then(|c| c.get("sentences")) {
        match echoed_sentences(echo, "$.cases[0].sentences") {
            Ok(list) => sentences = list,
            Err(v) => checker.reject(v)?,
        }
    }

    let mut result = AnalysisResult {
        article_ref: ArticleRef::default(),
        title,
        source,
        sentences,
        detected: merged,
        raw_response: raw.to_string(),
        created_at: DateTime::<Utc>::UNIX_EPOCH,
    };
    if let Some(meta) = root.get("metadata") {
        match serde_json::from_value::<Metadata>(to_value(meta)) {
            Ok(meta) => {
                if let Some(article_ref) = meta.article_ref {
                    result.article_ref = article_ref;
                }
                if let Some(created_at) = meta.created_at {
                    result.created_at = created_at;
                }
                if let Some(raw_response) = meta.raw_response {
                    result.raw_response = raw_response;
                }
            }
            Err(e) => checker.reject(violation("$.metadata", e.to_string()))?,
        }
    }
    Ok(Parsed { result, warnings: checker.warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::registry_default;

    fn lenient(raw: &str, n: usize) -> Result<Parsed, ParseError> {
        parse_llm_response(raw, &registry_default(), n, ParseMode::Lenient)
    }

    fn strict(raw: &str, n: usize) -> Result<Parsed, ParseError> {
        parse_llm_response(raw, &registry_default(), n, ParseMode::Strict)
    }

    fn doc(fallacies: &str) -> String {
        format!(r#"{{"cases": [{{"name": "T", "source": "S", "fallacies": {fallacies}}}]}}"#)
    }

    const LAYERS: &str = r#"{"L1": [{"explanation": "a", "sentence": [1], "link": "https://www.google.com/search?q=a"}],
        "L2": [{"explanation": "b", "sentence": [1]}], "L3": [{"explanation": "c", "sentence": [1]}]}"#;

    #[test]
    fn empty_cases_is_empty_detection() {
        let parsed = strict(r#"{"cases": []}"#, 3).unwrap();
        assert!(parsed.result.detected.is_empty());
        assert!(lenient(r#"{"cases": []}"#, 3).unwrap().result.detected.is_empty());
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(strict("I could not find any fallacies.", 3), Err(ParseError::MalformedJson(_))));
        assert!(matches!(lenient("{\"cases\": [", 3), Err(ParseError::MalformedJson(_))));
    }

    #[test]
    fn structural_errors_are_fatal_in_both_modes() {
        assert!(matches!(strict(r#"{"foo": 1}"#, 3), Err(ParseError::SchemaViolation { .. })));
        assert!(matches!(lenient(r#"{"cases": 3}"#, 3), Err(ParseError::SchemaViolation { .. })));
    }

    #[test]
    fn unknown_code() {
        let raw = doc(&format!(
            r#"{{"logical_fallacies": ["XX", "CP"], "sentences": {{"XX": [1], "CP": [2]}}, "annotations": {{"CP": {LAYERS}}}}}"#
        ));
        match strict(&raw, 3) {
            Err(ParseError::SchemaViolation { reason, .. }) => assert!(reason.contains("XX")),
            other => panic!("{other:?}"),
        }
        let parsed = lenient(&raw, 3).unwrap();
        assert_eq!(parsed.result.detected.len(), 1);
        assert_eq!(parsed.result.detected[0].code, "CP");
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn missing_level_is_invalid() {
        let raw = doc(r#"{"logical_fallacies": ["CP"], "sentences": {"CP": [1]},
            "annotations": {"CP": {"L1": [{"explanation": "a", "sentence": [1]}], "L2": [{"explanation": "b", "sentence": [1]}]}}}"#);
        match strict(&raw, 2) {
            Err(ParseError::SchemaViolation { path, .. }) => assert!(path.ends_with("annotations.CP.L3"), "{path}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(lenient(&raw, 2), Err(ParseError::EmptyAfterFiltering { .. })));
    }

    #[test]
    fn empty_sentence_list_is_invalid() {
        let raw = doc(r#"{"logical_fallacies": ["CP"], "sentences": {"CP": []}}"#);
        assert!(matches!(strict(&raw, 2), Err(ParseError::SchemaViolation { .. })));
        assert!(matches!(lenient(&raw, 2), Err(ParseError::EmptyAfterFiltering { .. })));
        let listed_only = doc(r#"{"logical_fallacies": ["CP"]}"#);
        assert!(matches!(strict(&listed_only, 2), Err(ParseError::SchemaViolation { .. })));
    }

    #[test]
    fn duplicate_codes_merge() {
        let raw = format!(
            r#"{{"cases": [
                {{"fallacies": {{"logical_fallacies": ["CP"], "sentences": {{"CP": [3, 1], "CP": [2]}}, "annotations": {{"CP": {LAYERS}}}}}}},
                {{"fallacies": {{"logical_fallacies": ["CP"], "sentences": {{"CP": [4]}}}}}}
            ]}}"#
        );
        for parsed in [strict(&raw, 5).unwrap(), lenient(&raw, 5).unwrap()] {
            let cp = parsed.result.instance("CP").unwrap();
            assert_eq!(cp.sentence_indices, vec![1, 2, 3, 4]);
            assert_eq!(cp.layers.len(), 3);
            assert_eq!(cp.layers[0].explanation, "a");
        }
        assert!(!lenient(&raw, 5).unwrap().warnings.is_empty());
    }

    #[test]
    fn allowed_codes_restrict() {
        let raw = doc(r#"{"logical_fallacies": ["CP", "RH"], "sentences": {"CP": [1], "RH": [1]}}"#);
        let allowed = vec!["CP".to_string()];
        let registry = registry_default();
        let opts = ParseOptions {
            registry: &registry,
            sentence_count: 2,
            mode: ParseMode::Lenient,
            allowed_codes: Some(&allowed),
        };
        let parsed = parse_response(&raw, &opts).unwrap();
        assert_eq!(parsed.result.detected.len(), 1);
        assert_eq!(parsed.result.detected[0].code, "CP");
    }

    #[test]
    fn detected_sorted_by_registry_order() {
        let raw = doc(r#"{"logical_fallacies": ["VAG", "EBP"], "sentences": {"VAG": [2], "EBP": [1]}}"#);
        let codes: Vec<String> = strict(&raw, 2).unwrap().result.detected.into_iter().map(|i| i.code).collect();
        assert_eq!(codes, ["EBP", "VAG"]);
    }

    #[test]
    fn string_index_rejected() {
        let raw = doc(r#"{"logical_fallacies": ["CP"], "sentences": {"CP": ["1"]}}"#);
        assert!(matches!(strict(&raw, 2), Err(ParseError::SchemaViolation { .. })));
    }
}
