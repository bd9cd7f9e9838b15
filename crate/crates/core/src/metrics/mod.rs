//! Corpus statistics relating fallacy density to article bias and
//! reliability: features, correlations, OLS with adjusted R², k-fold CV and
//! the two directional hypothesis checks.

mod correlation;
mod corpus;
mod features;
mod regression;
mod report;
mod study;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use correlation::{average_ranks, pearson, pearson_p_value, spearman};
pub use corpus::{analysis_from_json, load_corpus};
pub use features::{featurize, FeatureVector, FEATURE_NAMES};
pub use regression::{cross_validate, fold_assignment, lstsq, ols_fit, CvSummary, OlsFit};
pub use report::render_table;
pub use study::{
    design_matrix, kfold_cv, run_study, CorpusRecord, CorrelationEntry, HypothesisCheck, OlsSummary,
    StatsReport, StudyConfig, DEFAULT_ALPHA, DEFAULT_FOLDS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("design matrix is singular")]
    SingularDesign,
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Reliability,
    AbsBias,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Reliability, Target::AbsBias];

    pub fn key(self) -> &'static str {
        match self {
            Target::Reliability => "reliability",
            Target::AbsBias => "abs_bias",
        }
    }
}
