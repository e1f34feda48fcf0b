//! Retrieval, classification and regression metrics, weighted-random
//! baselines and multi-run aggregation.

mod baseline;
mod classification;
mod regression;
mod report;
mod retrieval;

use thiserror::Error;

use crate::model::ModelError;

pub use baseline::{
    monte_carlo_baseline, monte_carlo_baseline_with, mounted_weapon_prior, random_baseline_dimensions,
    random_baseline_qualities, random_baseline_regression, random_baseline_retrieval, DrawModel,
    RetrievalBaseline, MIN_MONTE_CARLO_TRIALS,
};
pub use classification::{
    binary_detection_accuracy, classification_accuracy, qualities_jaccard_mean, qualities_set_accuracy,
    random_baseline_binary,
};
pub use regression::{regression_metrics, RegressionMetrics, RegressionSample};
pub use report::{aggregate_runs, format_percent, format_sig4, EvalReport, MetricRow};
pub use retrieval::{accuracy_at_1, all_correct_at_k, any_correct_at_k, precision_at_k, RetrievalOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no samples to score")]
    Empty,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("query {query_id:?} has {have} hits, fewer than k = {k}")]
    TooFewHits { query_id: String, have: usize, k: usize },
    #[error("query {query_id:?} has a zero ground truth; percentage error is undefined")]
    ZeroTruth { query_id: String },
    #[error("no vehicle spec for target type {0:?}")]
    MissingSpec(String),
    #[error("runs disagree on metric names: {0}")]
    MismatchedMetrics(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
