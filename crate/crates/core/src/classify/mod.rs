//! Binary event classification on learned feature vectors.
//!
//! A ridge-stabilized logistic regression fit by iteratively reweighted
//! least squares, Wald significance statistics for every feature, and
//! seeded k-fold cross-validation that pools out-of-fold predictions
//! into contingency counts.

mod cv;
mod glm;
mod normal;

pub use cv::{
    cross_validate, cross_validate_with, kfold_split, stratified_kfold_split, CvResult,
    FoldAssignment,
};
pub use glm::{apply_threshold, fit_logistic, significance_table, GlmFit};
pub use normal::standard_normal_cdf;
