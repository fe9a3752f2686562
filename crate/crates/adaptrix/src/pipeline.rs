//! The adaptive-reduction template: estimate once, then feed any embedder
//! the per-point neighborhood structure (or a fixed-k baseline derived from
//! it).

use crate::dataset::PointCloud;
use crate::error::{Error, Result};
use crate::idestim::{abide, AbideConfig, AbideResult};
use crate::lle::{lle_star, Embedding};
use crate::spectral::spectral_embed_star;
use crate::umap::{umap_star, UmapConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lle,
    Spectral,
    Umap,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Lle => "lle",
            Method::Spectral => "spectral",
            Method::Umap => "umap",
        }
    }
}

/// Neighbor-order policy fed to the embedder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KPolicy {
    /// The per-point orders from the estimator.
    #[default]
    Adaptive,
    /// A constant order.
    Fixed(usize),
    /// The rounded median of the estimated orders.
    FixedMedian,
}

/// Everything adaptive_reduce needs besides the data.
#[derive(Debug, Clone, Default)]
pub struct ReduceConfig {
    pub abide: AbideConfig,
    pub umap: UmapConfig,
    pub k_policy: KPolicy,
}

/// Run the estimator once, then dispatch to the chosen embedder with the
/// adaptive (or baseline) neighbor orders; the projection dimension is the
/// rounded estimate unless overridden.
pub fn adaptive_reduce(
    cloud: &PointCloud,
    method: Method,
    d_override: Option<usize>,
    config: &ReduceConfig,
) -> Result<(AbideResult, Embedding)> {
    let estimate =
        abide(cloud, &config.abide).map_err(|e| e.at_stage("estimation"))?;
    let d_proj = d_override.unwrap_or(estimate.d_star);
    let embedding = reduce_with_estimate(cloud, method, d_proj, &estimate, config)
        .map_err(|e| e.at_stage("embedding"))?;
    Ok((estimate, embedding))
}

/// The embedding half of [`adaptive_reduce`], reusing an existing estimate.
pub fn reduce_with_estimate(
    cloud: &PointCloud,
    method: Method,
    d_proj: usize,
    estimate: &AbideResult,
    config: &ReduceConfig,
) -> Result<Embedding> {
    let k_star: Vec<usize> = match config.k_policy {
        KPolicy::Adaptive => estimate.k_star.clone(),
        KPolicy::Fixed(k) => vec![k; cloud.n()],
        KPolicy::FixedMedian => {
            let k = median_rounded(&estimate.k_star)?;
            vec![k; cloud.n()]
        }
    };
    match method {
        Method::Lle => lle_star(cloud, &k_star, d_proj),
        Method::Spectral => spectral_embed_star(cloud, &k_star, d_proj),
        Method::Umap => umap_star(cloud, &k_star, d_proj, &config.umap),
    }
}

fn median_rounded(k_star: &[usize]) -> Result<usize> {
    if k_star.is_empty() {
        return Err(Error::InsufficientData("empty neighborhood vector".into()));
    }
    let mut sorted = k_star.to_vec();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    Ok(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]).div_ceil(2)
    })
}

/// Embed-project-classify pipeline for supervised evaluation: the embedding
/// is trained on the fold's training cloud only, held-out rows are projected
/// through locally adaptive reconstruction, and an unpenalized logistic
/// model fitted on the training embedding labels them.
#[derive(Debug, Clone)]
pub struct SupervisedLlePipeline {
    pub abide: AbideConfig,
    pub k_policy: KPolicy,
    pub logit_max_iter: usize,
    pub logit_tol: f64,
    /// Cap on the training d* (None uses d* as estimated).
    pub d_override: Option<usize>,
}

impl Default for SupervisedLlePipeline {
    fn default() -> Self {
        Self {
            abide: AbideConfig::default(),
            k_policy: KPolicy::Adaptive,
            logit_max_iter: 500,
            logit_tol: 1e-5,
            d_override: None,
        }
    }
}

impl crate::evaluate::FoldPipeline for SupervisedLlePipeline {
    fn fit_predict(
        &self,
        train: &PointCloud,
        test: ndarray::ArrayView2<'_, f64>,
        _fold_seed: u64,
    ) -> crate::error::Result<Vec<usize>> {
        use crate::evaluate::{classify, logistic_fit};
        use crate::oos::{project_batch, project_batch_fixed_k, TrainedModel};

        let labels = train
            .labels()
            .ok_or_else(|| Error::InvalidArgument("training cloud must be labeled".into()))?
            .to_vec();
        let mut estimate = abide(train, &self.abide)?;
        if let Some(d) = self.d_override {
            estimate.d_star = d;
        }
        let d_proj = estimate.d_star.min(train.dim()).min(train.n() - 2).max(1);
        estimate.d_star = d_proj;

        let test_embedding;
        let train_embedding;
        match self.k_policy {
            KPolicy::Adaptive => {
                train_embedding = lle_star(train, &estimate.k_star, d_proj)?;
                let model = TrainedModel::new(
                    train.clone(),
                    train_embedding.clone(),
                    &estimate,
                    self.abide.clone(),
                )?;
                test_embedding = project_batch(&model, test)?;
            }
            KPolicy::Fixed(k) => {
                train_embedding = crate::lle::lle_fixed(train, k, d_proj)?;
                test_embedding = project_batch_fixed_k(train, &train_embedding, k, test)?;
            }
            KPolicy::FixedMedian => {
                let k = median_rounded(&estimate.k_star)?;
                train_embedding = crate::lle::lle_fixed(train, k, d_proj)?;
                test_embedding = project_batch_fixed_k(train, &train_embedding, k, test)?;
            }
        }

        let model = logistic_fit(
            train_embedding.coords.view(),
            &labels,
            self.logit_max_iter,
            self.logit_tol,
        )?;
        classify(&model, test_embedding.view())
    }
}

/// Summary of a neighborhood-order distribution.
#[derive(Debug, Clone)]
pub struct KstarSummary {
    pub median: f64,
    pub mean: f64,
    pub std: f64,
    /// Histogram with Freedman-Diaconis bin widths: (low edge, high edge,
    /// count) per bin.
    pub histogram: Vec<(f64, f64, usize)>,
}

/// Median, mean, standard deviation, and a Freedman-Diaconis histogram of
/// the per-point neighborhood orders.
pub fn kstar_summary(result: &AbideResult) -> KstarSummary {
    let ks = &result.k_star;
    let n = ks.len();
    let mut sorted: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let var = sorted.iter().map(|k| (k - mean) * (k - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();

    let quartile = |q: f64| -> f64 {
        let pos = q * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        if lo + 1 < n {
            sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
        } else {
            sorted[lo]
        }
    };
    let iqr = quartile(0.75) - quartile(0.25);
    let lo = sorted[0];
    let hi = sorted[n - 1];
    let width = if iqr > 0.0 {
        2.0 * iqr / (n as f64).cbrt()
    } else {
        0.0
    };
    let histogram = if hi == lo || width == 0.0 {
        vec![(lo, hi, n)]
    } else {
        let bins = (((hi - lo) / width).ceil() as usize).max(1);
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &k in &sorted {
            let mut b = ((k - lo) / width) as usize;
            if b >= bins {
                b = bins - 1;
            }
            counts[b] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(b, c)| (lo + b as f64 * width, lo + (b + 1) as f64 * width, c))
            .collect()
    };
    KstarSummary {
        median,
        mean,
        std,
        histogram,
    }
}
