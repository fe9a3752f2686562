//! JSON report payloads. Field order is declaration order, so reports are
//! byte-stable given identical inputs; timing fields only appear behind the
//! opt-in `--timing` flag to keep default outputs run-independent.

use serde::Serialize;

use adaptrix::pipeline::KstarSummary;

#[derive(Serialize)]
pub struct GenerateReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub n: usize,
    pub dim: usize,
    pub classes: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub out: String,
}

#[derive(Serialize)]
pub struct KstarReport {
    pub median: f64,
    pub mean: f64,
    pub std: f64,
    /// (low edge, high edge, count) per bin.
    pub histogram: Vec<(f64, f64, usize)>,
}

impl From<KstarSummary> for KstarReport {
    fn from(s: KstarSummary) -> Self {
        Self {
            median: s.median,
            mean: s.mean,
            std: s.std,
            histogram: s.histogram,
        }
    }
}

#[derive(Serialize)]
pub struct EstimateReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub input: String,
    pub n: usize,
    pub dim: usize,
    pub alpha: f64,
    pub tau: f64,
    pub d_hat: f64,
    pub d_star: usize,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<f64>,
    pub kstar: KstarReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_star: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
    pub seed: u64,
}

#[derive(Serialize)]
pub struct EmbedReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub input: String,
    pub method: &'static str,
    pub n: usize,
    pub d_hat: f64,
    pub d_star: usize,
    pub d_used: usize,
    pub k_policy: String,
    pub seed: u64,
    pub out: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
}

#[derive(Serialize)]
pub struct EvaluateReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub input: String,
    pub method: &'static str,
    pub n: usize,
    pub d_star: usize,
    pub d_used: usize,
    pub k_policy: String,
    pub n_clusters: usize,
    pub ari: f64,
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
    pub kmeans_inertia: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_out: Option<String>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
}

#[derive(Serialize)]
pub struct FoldReport {
    pub accuracy: f64,
    pub f1_macro: f64,
}

#[derive(Serialize)]
pub struct SupervisedReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub input: String,
    pub mode: String,
    pub folds: Vec<FoldReport>,
    pub mean_accuracy: f64,
    pub mean_f1: f64,
    pub k_policy: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
}
