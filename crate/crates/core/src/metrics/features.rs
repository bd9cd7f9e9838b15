use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisResult;
use crate::taxonomy::DEFAULT_CODES;

/// Scalar feature names, in report order. Indicator features follow as
/// `has_<CODE>`.
pub const FEATURE_NAMES: [&str; 4] = [
    "fallacy_count",
    "fallacies_per_1000_words",
    "total_sentences_affected",
    "total_sentences_affected_per_1000_words",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub fallacy_count: usize,
    pub fallacies_per_1000_words: f64,
    pub total_sentences_affected: usize,
    pub total_sentences_affected_per_1000_words: f64,
    /// 0 or 1 for each of the nine default codes.
    pub indicators: BTreeMap<String, u8>,
}

impl FeatureVector {
    /// `(name, value)` pairs: the four scalars, then `has_<CODE>` in default
    /// registry order.
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            (FEATURE_NAMES[0].to_string(), self.fallacy_count as f64),
            (FEATURE_NAMES[1].to_string(), self.fallacies_per_1000_words),
            (FEATURE_NAMES[2].to_string(), self.total_sentences_affected as f64),
            (FEATURE_NAMES[3].to_string(), self.total_sentences_affected_per_1000_words),
        ];
        for code in DEFAULT_CODES {
            let v = self.indicators.get(code).copied().unwrap_or(0);
            out.push((format!("has_{code}"), f64::from(v)));
        }
        out
    }
}

/// Features of one analysed article. `word_count` must be at least 1.
pub fn featurize(analysis: &AnalysisResult, word_count: usize) -> FeatureVector {
    assert!(word_count >= 1, "word_count must be at least 1");
    let fallacy_count = analysis.detected.len();
    let affected: BTreeSet<usize> = analysis
        .detected
        .iter()
        .flat_map(|i| i.sentence_indices.iter().copied())
        .collect();
    let per_k = |n: usize| n as f64 / word_count as f64 * 1000.0;
    let indicators = DEFAULT_CODES
        .iter()
        .map(|code| (code.to_string(), u8::from(analysis.instance(code).is_some())))
        .collect();
    FeatureVector {
        fallacy_count,
        fallacies_per_1000_words: per_k(fallacy_count),
        total_sentences_affected: affected.len(),
        total_sentences_affected_per_1000_words: per_k(affected.len()),
        indicators,
    }
}
