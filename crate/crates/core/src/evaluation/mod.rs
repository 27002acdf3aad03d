//! Evaluation metrics and reports.
//!
//! Conventions shared by every metric: an item is predicted positive when
//! `score >= threshold`; precision with no predicted positives is reported
//! as 0 together with a `no_predictions` flag.

mod auc;
mod category;
mod correlation;
mod format;
mod quantile;
mod report;
mod threshold;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use auc::{rank_auc, roc_auc};
pub use category::{category_breakdown, CategoryBreakdown, CategoryRecall};
pub use correlation::{align_scores, pearson, pearson_matrix, CorrelationMatrix, CANONICAL_PROVIDER_ORDER};
pub use format::{fmt_sig6, round_sig6};
pub use quantile::{quantile_report, QuantileBin, QuantileReport};
pub use report::{
    emit_report, evaluate, read_report, write_quantiles_csv, write_stage_distribution_csv, AggregateRow, EvalConfig, EvalItem,
    EvalReport, F1Gain, LanguageSubset, MetricRow, ProviderScores, REPORT_SCHEMA,
};
pub use threshold::{prf_at_threshold, recall_at_fixed_precision, FixedPrecisionResult, PrecisionTarget, Prf};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no items")]
    Empty,
    #[error("length mismatch: {ids} ids, {scores} scores, {labels} labels")]
    LengthMismatch { ids: usize, scores: usize, labels: usize },
    #[error("score for `{0}` is not finite")]
    NonFinite(String),
    #[error("labels contain a single class; AUC is undefined")]
    SingleClass,
    #[error("correlation needs at least two providers")]
    TooFewProviders,
    #[error("provider `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("provider `{provider}` has {found} scores, expected {expected}")]
    MisalignedProvider {
        provider: String,
        expected: usize,
        found: usize,
    },
    #[error("providers share no scored ids")]
    NoSharedIds,
    #[error("toxic item `{0}` has no category")]
    MissingCategory(String),
    #[error("{items} items cannot fill {quantiles} quantiles")]
    TooFewItems { items: usize, quantiles: usize },
    #[error("need at least 2 quantiles, got {0}")]
    InvalidQuantiles(usize),
    #[error("precision floor {0} outside [0, 1]")]
    InvalidFloor(f64),
    #[error("report has no providers")]
    EmptyProviderSet,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl EvalError {
    pub fn is_io(&self) -> bool {
        matches!(self, EvalError::Io { .. })
    }
}

/// Scores and binary labels for one provider on one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScores {
    pub provider: String,
    pub language: String,
    ids: Vec<String>,
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl LabeledScores {
    pub fn new(
        provider: impl Into<String>,
        language: impl Into<String>,
        ids: Vec<String>,
        scores: Vec<f64>,
        labels: Vec<bool>,
    ) -> Result<Self, EvalError> {
        if ids.len() != scores.len() || scores.len() != labels.len() {
            return Err(EvalError::LengthMismatch {
                ids: ids.len(),
                scores: scores.len(),
                labels: labels.len(),
            });
        }
        if ids.is_empty() {
            return Err(EvalError::Empty);
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(EvalError::NonFinite(ids[i].clone()));
        }
        Ok(Self {
            provider: provider.into(),
            language: language.into(),
            ids,
            scores,
            labels,
        })
    }

    /// Anonymous ids `0..n`, for tests and ad hoc use.
    pub fn from_pairs(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self, EvalError> {
        let ids = (0..scores.len()).map(|i| i.to_string()).collect();
        Self::new("", "", ids, scores, labels)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|l| **l).count()
    }
}
