//! Ranking metrics, the leave-one-speech-out protocol and significance tests.

mod metrics;
mod protocol;
mod ttest;

pub use metrics::{
    average_precision, precision_at, query_metrics, Metric, MetricVector, QueryMetrics, RankedItem,
    RankedList,
};
pub use protocol::{
    aggregate, evaluate_fold, run_protocol, Averaging, EvalReport, ProtocolTask, QueryRecord,
    Scores, Significance,
};
pub use ttest::{paired_ttest, regularized_incomplete_beta, student_t_cdf, two_tailed_p, TTest};
