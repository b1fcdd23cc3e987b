//! Time-dependent AUC, cross-validated risk tables, parametric bootstrap intervals and
//! replicate-averaged AUCs.

mod auc;
mod bootstrap;
mod cv;
mod replicate;

pub use auc::{
    auc_report, mann_whitney_auc, roc_curve, time_dependent_auc, AucPoint, AucReport, RiskRow,
    RiskTable, DEFAULT_CUTOFFS,
};
pub use bootstrap::{bootstrap_auc_ci, percentile_interval, BootstrapResult, BootstrapUnit, DEFAULT_BOOTSTRAP};
pub use cv::{cross_validate, cv_method_fits, cv_method_tables, fold_of, table_from_fold_fits, FoldFit, Folds};
pub use replicate::{
    expected_auc_over_replicates, run_scenario_replicate, AucSummary, ExpectedAuc, ReplicateAucs,
};
