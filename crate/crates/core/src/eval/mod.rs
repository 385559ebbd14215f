//! Ranking metrics and the evaluation protocols built on them.

pub mod metrics;
pub mod protocol;

pub use metrics::{auc_pr, auc_roc, ndcg_at_k, rank_by_scores, rank_items_for_user, recall_at_k};
pub use protocol::{
    evaluate_link_prediction, evaluate_split, evaluate_top_n, selection_metric, EvalReport,
    TOP_N_CUTOFFS,
};
