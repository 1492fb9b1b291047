//! Experiment protocols and metrics.

mod cv;
pub mod metrics;
mod noise;
mod report;

pub use cv::{assign_group_folds, evaluate_grouped, grouped_cv_predict, stratified_cv_f1, stratified_folds, GroupedCv};
pub use noise::{fake_on_transform, inject_ccn_noise, NoiseSpec};
pub use report::{mean_std, EvalReport, FoldDiagnostics};
