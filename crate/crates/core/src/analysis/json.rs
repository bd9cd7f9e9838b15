//! Tolerant JSON intake for model output.
//!
//! Models wrap JSON in code fences or prose and often emit near-JSON: curly
//! quotes as string delimiters, bare keys (`{1: "a"}`), missing or trailing
//! commas. [`locate`] finds the document and [`repair`] rewrites those
//! lexical slips; the result is parsed into [`Json`], which keeps duplicate
//! object keys so the schema layer can see them.

use std::fmt;

use serde::de::{self, Deserialize, Deserializer, MapAccess, SeqAccess, Visitor};

/// JSON value whose objects keep every key in source order, duplicates included.
#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Number(serde_json::Number),
    String(String),
    Array(Vec<Json>),
    Object(Vec<(String, Json)>),
}

impl Json {
    pub fn kind(&self) -> &'static str {
        match self {
            Json::Null => "null",
            Json::Bool(_) => "boolean",
            Json::Number(_) => "number",
            Json::String(_) => "string",
            Json::Array(_) => "array",
            Json::Object(_) => "object",
        }
    }

    /// First value stored under `key`, for objects.
    pub fn get(&self, key: &str) -> Option<&Json> {
        match self {
            Json::Object(pairs) => pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            _ => None,
        }
    }
}

impl<'de> Deserialize<'de> for Json {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct JsonVisitor;

        impl<'de> Visitor<'de> for JsonVisitor {
            type Value = Json;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("any JSON value")
            }

            fn visit_unit<E>(self) -> Result<Json, E> {
                Ok(Json::Null)
            }

            fn visit_bool<E>(self, v: bool) -> Result<Json, E> {
                Ok(Json::Bool(v))
            }

            fn visit_i64<E>(self, v: i64) -> Result<Json, E> {
                Ok(Json::Number(v.into()))
            }

            fn visit_u64<E>(self, v: u64) -> Result<Json, E> {
                Ok(Json::Number(v.into()))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Json, E> {
                serde_json::Number::from_f64(v)
                    .map(Json::Number)
                    .ok_or_else(|| E::custom("non-finite number"))
            }

            fn visit_str<E>(self, v: &str) -> Result<Json, E> {
                Ok(Json::String(v.to_string()))
            }

            fn visit_string<E>(self, v: String) -> Result<Json, E> {
                Ok(Json::String(v))
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Json, A::Error> {
                let mut items = Vec::new();
                while let Some(item) = seq.next_element()? {
                    items.push(item);
                }
                Ok(Json::Array(items))
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Json, A::Error> {
                let mut pairs = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Json>()? {
                    pairs.push((k, v));
                }
                Ok(Json::Object(pairs))
            }
        }

        deserializer.deserialize_any(JsonVisitor)
    }
}

/// Slice out the JSON document: the body of the first code fence if any,
/// then the span from the first `{` to the last `}`.
pub fn locate(raw: &str) -> Option<&str> {
    let mut text = raw;
    if let Some(open) = raw.find("```") {
        let after = &raw[open + 3..];
        let body_start = after.find('\n').map_or(0, |n| n + 1);
        let body = &after[body_start..];
        text = body.find("```").map_or(body, |close| &body[..close]);
    }
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    (end > start).then(|| &text[start..=end])
}

fn is_open_quote(c: char) -> bool {
    matches!(c, '"' | '\u{201C}' | '\u{201D}')
}

fn is_bare_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '+' | '.')
}

/// Rewrite common lexical slips into valid JSON. Valid JSON passes through
/// unchanged.
pub fn repair(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len() + 16);
    // True when the last emitted token completed a value, so a following
    // value or key needs a separating comma.
    let mut value_ended = false;
    let mut i = 0;

    let trim_trailing_comma = |out: &mut String| {
        let trimmed = out.trim_end();
        if trimmed.ends_with(',') {
            let keep = trimmed.len() - 1;
            out.truncate(keep);
        }
    };

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            out.push(c);
            i += 1;
            continue;
        }
        match c {
            _ if is_open_quote(c) => {
                if value_ended {
                    out.push(',');
                }
                let curly = c != '"';
                out.push('"');
                i += 1;
                while i < chars.len() {
                    let s = chars[i];
                    if s == '\\' && i + 1 < chars.len() {
                        out.push(s);
                        out.push(chars[i + 1]);
                        i += 2;
                        continue;
                    }
                    let closes = if curly { is_open_quote(s) } else { s == '"' };
                    if closes {
                        break;
                    }
                    match s {
                        '\n' => out.push_str("\\n"),
                        '\t' => out.push_str("\\t"),
                        '\r' => {}
                        _ => out.push(s),
                    }
                    i += 1;
                }
                out.push('"');
                i += 1;
                value_ended = true;
            }
            '{' | '[' => {
                if value_ended {
                    out.push(',');
                }
                out.push(c);
                i += 1;
                value_ended = false;
            }
            '}' | ']' => {
                trim_trailing_comma(&mut out);
                out.push(c);
                i += 1;
                value_ended = true;
            }
            ':' | ',' => {
                out.push(c);
                i += 1;
                value_ended = false;
            }
            _ if is_bare_char(c) => {
                if value_ended {
                    out.push(',');
                }
                let start = i;
                while i < chars.len() && is_bare_char(chars[i]) {
                    i += 1;
                }
                let token: String = chars[start..i].iter().collect();
                let mut j = i;
                while j < chars.len() && chars[j].is_whitespace() {
                    j += 1;
                }
                if chars.get(j) == Some(&':') {
                    out.push('"');
                    out.push_str(&token);
                    out.push('"');
                } else {
                    match token.as_str() {
                        "True" => out.push_str("true"),
                        "False" => out.push_str("false"),
                        "None" => out.push_str("null"),
                        _ => out.push_str(&token),
                    }
                }
                value_ended = true;
            }
            _ => {
                out.push(c);
                i += 1;
            }
        }
    }
    out
}

/// Locate, repair and parse. The error string describes the failure.
pub fn parse_tolerant(raw: &str) -> Result<Json, String> {
    let located = locate(raw).ok_or_else(|| "no JSON object found".to_string())?;
    let repaired = repair(located);
    serde_json::from_str::<Json>(&repaired).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_json_unchanged() {
        let text = r#"{"a": [1, 2.5, -3], "b": {"c": "x \"y\" z"}, "d": null, "e": true}"#;
        assert_eq!(repair(text), text);
    }

    #[test]
    fn curly_quotes_bare_keys_and_missing_comma() {
        let text = "{\u{201C}sentences\u{201D}: {1: \u{201C}s 1\u{201D},2: \u{201C}s 2\u{201D}}\n\"next\": [1 2]}";
        let json: serde_json::Value = serde_json::from_str(&repair(text)).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"sentences": {"1": "s 1", "2": "s 2"}, "next": [1, 2]})
        );
    }

    #[test]
    fn trailing_commas_removed() {
        let json: serde_json::Value = serde_json::from_str(&repair("{\"a\": [1, 2,], }")).unwrap();
        assert_eq!(json, serde_json::json!({"a": [1, 2]}));
    }

    #[test]
    fn straight_string_keeps_inner_curly_quotes() {
        let json: serde_json::Value =
            serde_json::from_str(&repair("{\"a\": \"He said \u{201C}no\u{201D}\"}")).unwrap();
        assert_eq!(json["a"], "He said \u{201C}no\u{201D}");
    }

    #[test]
    fn fences_and_prose_are_skipped() {
        let raw = "Here you go:\n```json\n{\"cases\": []}\n```\nHope that helps {really}.";
        assert_eq!(locate(raw), Some("{\"cases\": []}"));
        assert_eq!(locate("Sure! {\"a\": 1} done"), Some("{\"a\": 1}"));
        assert_eq!(locate("no json here"), None);
    }

    #[test]
    fn duplicate_keys_preserved() {
        let json = parse_tolerant(r#"{"CP": [1], "CP": [2]}"#).unwrap();
        match json {
            Json::Object(pairs) => assert_eq!(pairs.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
