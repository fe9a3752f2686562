//! Out-of-sample projection: map unseen points into a trained embedding by
//! locally adaptive reconstruction.
//!
//! Each test point is treated as a temporary augmentation of the training
//! set: with the intrinsic dimension frozen at the trained d*, its uniform
//! neighborhood order is selected against training-set shells only, affine
//! reconstruction weights are solved over those neighbors, and the weights
//! are pushed through the neighbors' training embeddings. Test points never
//! see each other.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::dataset::PointCloud;
use crate::error::{Error, Result};
use crate::idestim::{chi2_quantile_1df, select_k_star_for_row, AbideConfig, AbideResult};
use crate::linalg::constrained_lsq_weights;
use crate::lle::Embedding;
use crate::neighbors::{build_neighbor_table, query_knn, NeighborTable};

/// A fitted embedding together with everything projection needs.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub train_cloud: PointCloud,
    pub train_embedding: Embedding,
    pub d_star: usize,
    pub abide_config: AbideConfig,
    train_k_star: Vec<usize>,
    table: NeighborTable,
    threshold: f64,
}

impl TrainedModel {
    /// Bundle a trained embedding with its estimation result; builds the
    /// training neighbor table used by every projection.
    pub fn new(
        train_cloud: PointCloud,
        train_embedding: Embedding,
        estimate: &AbideResult,
        abide_config: AbideConfig,
    ) -> Result<Self> {
        if train_embedding.coords.nrows() != train_cloud.n() {
            return Err(Error::DimensionMismatch {
                expected: train_cloud.n(),
                actual: train_embedding.coords.nrows(),
            });
        }
        if train_embedding.d_proj != estimate.d_star {
            return Err(Error::InvalidArgument(format!(
                "embedding dimension {} does not match d_star {}",
                train_embedding.d_proj, estimate.d_star
            )));
        }
        abide_config.validate()?;
        let k_max = abide_config.k_max_for(train_cloud.n());
        let table = build_neighbor_table(&train_cloud, k_max + 1)?;
        let threshold = chi2_quantile_1df(1.0 - abide_config.alpha)?;
        Ok(Self {
            train_cloud,
            train_embedding,
            d_star: estimate.d_star,
            abide_config,
            train_k_star: estimate.k_star.clone(),
            table,
            threshold,
        })
    }

    /// Median of the training neighborhood orders (rounded up on even
    /// counts), the fallback when a test point's scan never triggers.
    fn median_k_star(&self) -> usize {
        let mut sorted = self.train_k_star.clone();
        sorted.sort_unstable();
        let mid = sorted.len() / 2;
        if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            let sum = sorted[mid - 1] + sorted[mid];
            sum.div_ceil(2)
        }
    }
}

/// Project one unseen point into the trained embedding.
pub fn project_test_point(model: &TrainedModel, x_test: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let train = &model.train_cloud;
    if x_test.len() != train.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            actual: x_test.len(),
        });
    }
    // Sorted training neighbors of the test point, deep enough for the scan.
    let depth = (model.table.depth() + 1).min(train.n());
    let found = query_knn(train, x_test, depth)?;
    let ids: Vec<u32> = found.iter().map(|&(j, _)| j as u32).collect();
    let dists: Vec<f64> = found.iter().map(|&(_, d)| d).collect();

    let k_test = select_k_star_for_row(
        &dists,
        &ids,
        &model.table,
        model.d_star as f64,
        model.threshold,
        &model.abide_config,
    )
    .unwrap_or_else(|| model.median_k_star())
    .min(train.n());

    let neighbor_ids = &ids[..k_test];
    let mut neighbors = Array2::zeros((k_test, train.dim()));
    for (a, &j) in neighbor_ids.iter().enumerate() {
        neighbors.row_mut(a).assign(&train.row(j as usize));
    }
    if k_test > 1 {
        let spread = neighbors
            .rows()
            .into_iter()
            .skip(1)
            .flat_map(|r| {
                r.iter()
                    .zip(neighbors.row(0).iter())
                    .map(|(a, b)| (a - b).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0f64, f64::max);
        if spread == 0.0 && dists[0] > 0.0 {
            log::warn!("all {k_test} neighbors of a test point coincide; solve is ridge-dominated");
        }
    }
    let w = constrained_lsq_weights(x_test, neighbors.view())?;

    let mut projected = Array1::zeros(model.d_star);
    for (a, &j) in neighbor_ids.iter().enumerate() {
        let y = model.train_embedding.coords.row(j as usize);
        for d in 0..model.d_star {
            projected[d] += w[a] * y[d];
        }
    }
    Ok(projected)
}

/// Fixed-order projection baseline: reconstruction weights over a constant
/// number of nearest training points, no neighborhood scan.
pub fn project_batch_fixed_k(
    train_cloud: &PointCloud,
    train_embedding: &Embedding,
    k: usize,
    x_test: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    if train_embedding.coords.nrows() != train_cloud.n() {
        return Err(Error::DimensionMismatch {
            expected: train_cloud.n(),
            actual: train_embedding.coords.nrows(),
        });
    }
    let d_out = train_embedding.d_proj;
    let m = x_test.nrows();
    let mut out = Array2::zeros((m, d_out));
    let rows: Vec<Result<Array1<f64>>> = (0..m)
        .into_par_iter()
        .map(|r| {
            let x = x_test.row(r);
            let found = query_knn(train_cloud, x, k)?;
            let mut neighbors = Array2::zeros((k, train_cloud.dim()));
            for (a, &(j, _)) in found.iter().enumerate() {
                neighbors.row_mut(a).assign(&train_cloud.row(j));
            }
            let w = constrained_lsq_weights(x, neighbors.view())?;
            let mut y = Array1::zeros(d_out);
            for (a, &(j, _)) in found.iter().enumerate() {
                let yj = train_embedding.coords.row(j);
                for d in 0..d_out {
                    y[d] += w[a] * yj[d];
                }
            }
            Ok(y)
        })
        .collect();
    for (r, row) in rows.into_iter().enumerate() {
        let row = row.map_err(|e| Error::Row {
            row: r,
            source: Box::new(e),
        })?;
        out.row_mut(r).assign(&row);
    }
    Ok(out)
}

/// Row-wise [`project_test_point`]; each row is augmented independently.
pub fn project_batch(model: &TrainedModel, x_test: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let m = x_test.nrows();
    let mut out = Array2::zeros((m, model.d_star));
    if m == 0 {
        return Ok(out);
    }
    let rows: Vec<Result<Array1<f64>>> = (0..m)
        .into_par_iter()
        .map(|r| project_test_point(model, x_test.row(r)))
        .collect();
    for (r, row) in rows.into_iter().enumerate() {
        let row = row.map_err(|e| Error::Row {
            row: r,
            source: Box::new(e),
        })?;
        out.row_mut(r).assign(&row);
    }
    Ok(out)
}
