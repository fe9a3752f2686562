//! Clustering, external agreement metrics, unpenalized multinomial logistic
//! regression, and cross-validation.

mod cv;
mod kmeans;
mod logistic;
mod metrics;

pub use cv::{holdout_indices, kfold_cv, CvReport, FoldMetrics, FoldPipeline};
pub use kmeans::{kmeans, KmeansFit};
pub use logistic::{accuracy, classify, f1_macro, logistic_fit, LogisticModel};
pub use metrics::{
    adjusted_rand_index, cluster_eval, homogeneity_completeness_v, ClusterEval, Contingency,
};
