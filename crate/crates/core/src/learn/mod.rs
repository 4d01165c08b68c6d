//! Random forest classification, scoring and subject-wise cross-validation.

mod forest;
mod loso;
mod metrics;
mod tree;

pub use forest::{train_forest, train_forest_indexed, ForestModel, ForestParams, MODEL_FORMAT_VERSION};
pub use loso::{
    loso_experiment, loso_experiment_windows, stratified_subsample, CalibrationOptions, ExperimentConfig,
    ExperimentReport, RunResult, Scenario,
};
pub use metrics::{confusion_matrix, macro_f1, per_class_f1};
pub use tree::{DecisionTree, Node};
