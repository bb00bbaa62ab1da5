//! Kernel ridge regression and the shared evaluation metrics.

mod krr;
mod logistic;
mod metrics;
mod report;

pub use krr::{
    grid_search, krr_fit, krr_loocv, rbf_kernel, GridSearch, GridSearchResult, KernelConfig,
    KrrModel,
};
pub use logistic::LogisticModel;
pub use metrics::{
    pearson_r, pearson_r_p, rmse, roc_auc, RocCurve, RocPoint, DEFAULT_PERMUTATIONS,
};
pub use report::{score_metrics, EvaluationReport, PredictionRow, RocSummary, ScoreMetrics};
