use std::collections::{BTreeMap, HashSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::correlation::{pearson, pearson_p_value, spearman};
use super::features::{featurize, FeatureVector};
use super::regression::{cross_validate, ols_fit, CvSummary};
use super::{MetricsError, Target};
use crate::analysis::AnalysisResult;
use crate::extraction::count_words;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_FOLDS: usize = 5;

const FPKW: &str = "fallacies_per_1000_words";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub article_id: String,
    /// Signed lean: negative left, positive right.
    pub bias: f64,
    pub reliability: f64,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub word_count: Option<usize>,
    #[serde(default)]
    pub analysis: Option<AnalysisResult>,
}

impl CorpusRecord {
    pub fn new(article_id: impl Into<String>, bias: f64, reliability: f64) -> Self {
        Self { article_id: article_id.into(), bias, reliability, text: None, word_count: None, analysis: None }
    }

    pub fn with_analysis(mut self, analysis: AnalysisResult) -> Self {
        self.analysis = Some(analysis);
        self
    }

    pub fn with_word_count(mut self, word_count: usize) -> Self {
        self.word_count = Some(word_count);
        self
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    pub fn target(&self, target: Target) -> f64 {
        match target {
            Target::Reliability => self.reliability,
            Target::AbsBias => self.bias.abs(),
        }
    }

    /// Explicit count, else the text, else the analysed sentences.
    pub fn resolved_word_count(&self) -> usize {
        if let Some(n) = self.word_count {
            return n;
        }
        if let Some(text) = &self.text {
            return count_words(text);
        }
        self.analysis
            .as_ref()
            .map_or(0, |a| a.sentences.iter().map(|s| count_words(s)).sum())
    }

    pub fn features(&self) -> Result<FeatureVector, MetricsError> {
        let analysis = self
            .analysis
            .as_ref()
            .ok_or_else(|| MetricsError::InvalidCorpus(format!("{}: no analysis", self.article_id)))?;
        let words = self.resolved_word_count();
        if words == 0 {
            return Err(MetricsError::InvalidCorpus(format!("{}: word count is zero", self.article_id)));
        }
        Ok(featurize(analysis, words))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub alpha: f64,
    pub k: usize,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA, k: DEFAULT_FOLDS, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub feature: String,
    pub target: Target,
    /// `None` when the feature is constant across the corpus.
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub pearson_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsSummary {
    /// `intercept` first, then the design columns.
    pub coefficient_names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Columns left out because they were constant or collinear.
    pub dropped_features: Vec<String>,
    pub r2: f64,
    pub adjusted_r2: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub feature: String,
    pub target: Target,
    pub expected_sign: i8,
    pub pearson: f64,
    pub p_value: f64,
    pub sign_matches: bool,
    pub significant: bool,
    pub supported: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub n: usize,
    pub alpha: f64,
    pub k: usize,
    pub seed: u64,
    pub standardized_features: bool,
    pub correlations: Vec<CorrelationEntry>,
    pub ols: BTreeMap<Target, OlsSummary>,
    pub cv: BTreeMap<Target, CvSummary>,
    pub hypothesis_checks: BTreeMap<String, HypothesisCheck>,
    /// Slot for regressors other than OLS; empty in this build.
    pub alternative_regressors: BTreeMap<String, serde_json::Value>,
}

impl StatsReport {
    pub fn correlation(&self, feature: &str, target: Target) -> Option<&CorrelationEntry> {
        self.correlations.iter().find(|c| c.feature == feature && c.target == target)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn validate(records: &[CorpusRecord]) -> Result<(), MetricsError> {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.article_id.as_str()) {
            return Err(MetricsError::InvalidCorpus(format!("duplicate article_id {}", r.article_id)));
        }
        if !r.bias.is_finite() || !r.reliability.is_finite() || !(0.0..=64.0).contains(&r.reliability) {
            return Err(MetricsError::InvalidCorpus(format!(
                "{}: bias {} / reliability {} out of range",
                r.article_id, r.bias, r.reliability
            )));
        }
    }
    Ok(())
}

fn sorted(records: &[CorpusRecord]) -> Vec<&CorpusRecord> {
    let mut out: Vec<&CorpusRecord> = records.iter().collect();
    out.sort_by(|a, b| a.article_id.cmp(&b.article_id));
    out
}

fn full_rank(columns: &[Vec<f64>], n: usize) -> bool {
    let m = DMatrix::from_fn(n, columns.len() + 1, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] });
    let sv = m.singular_values();
    let tol = sv.max() * n.max(columns.len() + 1) as f64 * f64::EPSILON * 1e3;
    sv.iter().all(|&s| s > tol)
}

/// Regression design: fpkw, sentences-affected per 1000 words and the nine
/// indicators. Raw counts are omitted because the count equals the sum of
/// the indicators. Constant or collinear columns are skipped greedily, in
/// order. Returns `(kept names, rows, dropped names)`.
pub fn design_matrix(features: &[FeatureVector]) -> (Vec<String>, Vec<Vec<f64>>, Vec<String>) {
    let n = features.len();
    let named: Vec<Vec<(String, f64)>> = features.iter().map(FeatureVector::named_values).collect();
    let candidates: Vec<String> = named
        .first()
        .map(|row| {
            row.iter()
                .map(|(name, _)| name.clone())
                .filter(|name| name != "fallacy_count" && name != "total_sentences_affected")
                .collect()
        })
        .unwrap_or_default();
    let column = |name: &str| -> Vec<f64> {
        named
            .iter()
            .map(|row| row.iter().find(|(k, _)| k == name).map_or(0.0, |(_, v)| *v))
            .collect()
    };
    let mut kept_names = Vec::new();
    let mut kept_cols: Vec<Vec<f64>> = Vec::new();
    let mut dropped = Vec::new();
    for name in candidates {
        let col = column(&name);
        let mut trial = kept_cols.clone();
        trial.push(col.clone());
        if n > trial.len() + 1 && full_rank(&trial, n) {
            kept_names.push(name);
            kept_cols.push(col);
        } else {
            dropped.push(name);
        }
    }
    let rows = (0..n).map(|i| kept_cols.iter().map(|c| c[i]).collect()).collect();
    (kept_names, rows, dropped)
}

/// Cross-validated MSE of the study design for one target.
pub fn kfold_cv(records: &[CorpusRecord], target: Target, k: usize, seed: u64) -> Result<CvSummary, MetricsError> {
    validate(records)?;
    let ordered = sorted(records);
    let features = ordered.iter().map(|r| r.features()).collect::<Result<Vec<_>, _>>()?;
    let (_, rows, _) = design_matrix(&features);
    let y: Vec<f64> = ordered.iter().map(|r| r.target(target)).collect();
    cross_validate(&rows, &y, k, seed)
}

fn optional(result: Result<f64, MetricsError>) -> Result<Option<f64>, MetricsError> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(MetricsError::DegenerateInput(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn run_study(records: &[CorpusRecord], config: &StudyConfig) -> Result<StatsReport, MetricsError> {
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(MetricsError::InvalidCorpus(format!("alpha {} outside (0, 1)", config.alpha)));
    }
    validate(records)?;
    let ordered = sorted(records);
    let n = ordered.len();
    if n < 3 {
        return Err(MetricsError::InsufficientData(format!("need at least 3 records, got {n}")));
    }
    let features = ordered.iter().map(|r| r.features()).collect::<Result<Vec<_>, _>>()?;
    let named: Vec<Vec<(String, f64)>> = features.iter().map(FeatureVector::named_values).collect();
    let feature_names: Vec<String> = named[0].iter().map(|(k, _)| k.clone()).collect();

    let mut correlations = Vec::new();
    for target in Target::ALL {
        let y: Vec<f64> = ordered.iter().map(|r| r.target(target)).collect();
        for (j, name) in feature_names.iter().enumerate() {
            let x: Vec<f64> = named.iter().map(|row| row[j].1).collect();
            let r = optional(pearson(&x, &y))?;
            let pearson_p = r.map(|r| pearson_p_value(r, n)).transpose()?;
            correlations.push(CorrelationEntry {
                feature: name.clone(),
                target,
                pearson: r,
                spearman: optional(spearman(&x, &y))?,
                pearson_p,
            });
        }
    }

    let (kept, rows, dropped) = design_matrix(&features);
    let mut ols = BTreeMap::new();
    let mut cv = BTreeMap::new();
    for target in Target::ALL {
        let y: Vec<f64> = ordered.iter().map(|r| r.target(target)).collect();
        let fit = ols_fit(&rows, &y)?;
        let mut coefficient_names = vec!["intercept".to_string()];
        coefficient_names.extend(kept.iter().cloned());
        ols.insert(
            target,
            OlsSummary {
                coefficient_names,
                coefficients: fit.coefficients,
                dropped_features: dropped.clone(),
                r2: fit.r2,
                adjusted_r2: fit.adjusted_r2,
                mse: fit.mse,
            },
        );
        cv.insert(target, cross_validate(&rows, &y, config.k, config.seed)?);
    }

    let mut hypothesis_checks = BTreeMap::new();
    for (label, target, sign) in [("H1", Target::Reliability, -1i8), ("H2", Target::AbsBias, 1i8)] {
        let entry = correlations
            .iter()
            .find(|c| c.feature == FPKW && c.target == target)
            .expect("fpkw correlation computed");
        let (pearson, p_value) = match (entry.pearson, entry.pearson_p) {
            (Some(r), Some(p)) => (r, p),
            _ => {
                return Err(MetricsError::DegenerateInput(format!(
                    "{FPKW} or {} has zero variance",
                    target.key()
                )))
            }
        };
        let sign_matches = pearson * f64::from(sign) > 0.0;
        let significant = p_value < config.alpha;
        hypothesis_checks.insert(
            label.to_string(),
            HypothesisCheck {
                feature: FPKW.to_string(),
                target,
                expected_sign: sign,
                pearson,
                p_value,
                sign_matches,
                significant,
                supported: sign_matches && significant,
            },
        );
    }

    Ok(StatsReport {
        n,
        alpha: config.alpha,
        k: config.k,
        seed: config.seed,
        standardized_features: false,
        correlations,
        ols,
        cv,
        hypothesis_checks,
        alternative_regressors: BTreeMap::new(),
    })
}
