//! Metrics, model selection and data-splitting protocol.

mod metrics;
mod pareto;
mod report;
mod split;

use thiserror::Error;

use crate::hin::NodeId;

pub use metrics::{
    career_set, diff_dp, diff_eo, diff_eo_with, dp_terms, mrr, mrr_from_probs, rank_in_row, ranking_from_probs, EoDenominator,
    PredictionRecord,
};
pub use pareto::{dominates, pareto_frontier, pareto_points};
pub use report::{
    format_params, gnn_baseline_for_fairness, mean_points, method_frontiers, param_value, read_reports, threshold_select, write_reports,
    EvalReport, FairnessMetric, MeanPoint, ThresholdRow, ThresholdTable, Thresholds,
};
pub use split::{balance_data, group_counts, nested_cv_split, Balanced, SplitPlan, MIN_STRATUM, NUM_FOLDS};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no records to evaluate")]
    Empty,
    #[error("a protected group has no records")]
    EmptyGroup,
    #[error("user {user}: true career {truth} missing from the ranking")]
    TruthNotRanked { user: NodeId, truth: NodeId },
    #[error("user {0} has an empty ranking")]
    EmptyRanking(NodeId),
    #[error("user {0} listed twice")]
    DuplicateUser(NodeId),
    #[error("user {0} has no group label")]
    Ungrouped(NodeId),
    #[error("no runs of baseline method {0:?}")]
    MissingBaseline(String),
    #[error("invalid report: {0}")]
    InvalidReport(String),
    #[error("report csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for EvalError {
    fn from(e: csv::Error) -> Self {
        EvalError::Csv(e.to_string())
    }
}
