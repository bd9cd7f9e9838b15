//! Corpus files: a CSV with header `article_id,bias,reliability` plus either
//! `text_path` (plain article text) or `analysis_path` (a stored analysis in
//! canonical JSON), and an optional `word_count`. Relative paths resolve
//! against the corpus file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::study::CorpusRecord;
use super::MetricsError;
use crate::analysis::{parse_response, AnalysisResult, ParseMode, ParseOptions};
use crate::taxonomy::FallacyRegistry;

#[derive(Debug, Deserialize)]
struct Row {
    article_id: String,
    bias: f64,
    reliability: f64,
    #[serde(default)]
    text_path: Option<String>,
    #[serde(default)]
    analysis_path: Option<String>,
    #[serde(default)]
    word_count: Option<usize>,
}

/// Read a stored analysis. Sentence indices are checked against the echoed
/// sentences when those are present.
pub fn analysis_from_json(text: &str, registry: &FallacyRegistry) -> Result<AnalysisResult, MetricsError> {
    let options = ParseOptions {
        registry,
        sentence_count: usize::MAX,
        mode: ParseMode::Strict,
        allowed_codes: None,
    };
    let result = parse_response(text, &options)
        .map_err(|e| MetricsError::InvalidCorpus(format!("stored analysis: {e}")))?
        .result;
    let n = result.sentences.len();
    if n > 0 {
        let beyond = result.detected.iter().flat_map(|i| &i.sentence_indices).any(|&i| i > n);
        if beyond {
            return Err(MetricsError::InvalidCorpus(format!(
                "stored analysis references a sentence beyond {n}"
            )));
        }
    }
    Ok(result)
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read(path: &Path) -> Result<String, MetricsError> {
    std::fs::read_to_string(path)
        .map_err(|e| MetricsError::InvalidCorpus(format!("{}: {e}", path.display())))
}

pub fn load_corpus(path: &Path, registry: &FallacyRegistry) -> Result<Vec<CorpusRecord>, MetricsError> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| MetricsError::InvalidCorpus(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| MetricsError::InvalidCorpus(e.to_string()))?
        .clone();
    for required in ["article_id", "bias", "reliability"] {
        if !headers.iter().any(|h| h == required) {
            return Err(MetricsError::InvalidCorpus(format!("missing column {required}")));
        }
    }
    if !headers.iter().any(|h| h == "text_path" || h == "analysis_path") {
        return Err(MetricsError::InvalidCorpus("need a text_path or analysis_path column".into()));
    }

    let mut records = Vec::new();
    for (line, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| MetricsError::InvalidCorpus(format!("row {}: {e}", line + 2)))?;
        let mut record = CorpusRecord::new(row.article_id, row.bias, row.reliability);
        record.word_count = row.word_count;
        match (row.analysis_path.filter(|p| !p.is_empty()), row.text_path.filter(|p| !p.is_empty())) {
            (Some(a), text) => {
                record.analysis = Some(analysis_from_json(&read(&resolve(base, &a))?, registry)?);
                if let Some(t) = text {
                    record.text = Some(read(&resolve(base, &t))?);
                }
            }
            (None, Some(t)) => record.text = Some(read(&resolve(base, &t))?),
            (None, None) => {
                return Err(MetricsError::InvalidCorpus(format!(
                    "{}: neither text_path nor analysis_path given",
                    record.article_id
                )))
            }
        }
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::registry_default;

    fn scratch(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("skeptik-corpus-{name}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn loads_text_and_analysis_rows() {
        let dir = scratch("ok");
        std::fs::write(dir.join("a.txt"), "One two three. Four five.").unwrap();
        std::fs::write(
            dir.join("b.json"),
            r#"{"cases": [{"name": "B", "source": "x", "sentences": {"1": "s1", "2": "s2"},
                "fallacies": {"logical_fallacies": ["CP"], "sentences": {"CP": [2]}, "annotations": {}}}]}"#,
        )
        .unwrap();
        std::fs::write(
            dir.join("corpus.csv"),
            "article_id,bias,reliability,text_path,analysis_path,word_count\n\
             a,-3.5,40,a.txt,,\n\
             b,12,22,,b.json,900\n",
        )
        .unwrap();
        let records = load_corpus(&dir.join("corpus.csv"), &registry_default()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].resolved_word_count(), 5);
        assert!(records[0].analysis.is_none());
        let b = records[1].analysis.as_ref().unwrap();
        assert_eq!(b.detected[0].sentence_indices, vec![2]);
        assert_eq!(records[1].word_count, Some(900));
    }

    #[test]
    fn rejects_bad_headers_and_indices() {
        let dir = scratch("bad");
        std::fs::write(dir.join("c.csv"), "article_id,bias\nx,1\n").unwrap();
        assert!(load_corpus(&dir.join("c.csv"), &registry_default()).is_err());
        let bad = r#"{"cases": [{"sentences": {"1": "s1"},
            "fallacies": {"logical_fallacies": ["CP"], "sentences": {"CP": [3]}}}]}"#;
        assert!(analysis_from_json(bad, &registry_default()).is_err());
    }
}
