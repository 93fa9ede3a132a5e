//! Ranking metrics and the offline evaluation protocol.

pub mod metrics;
mod offline;

pub use metrics::{ndcg_at_k, ndcg_at_k_with, Gain};
pub use offline::{evaluate_offline, judgment_seed, paired_t_test, EvalReport, QueryNdcg, TTest};
