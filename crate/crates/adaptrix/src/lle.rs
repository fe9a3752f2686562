//! Locally linear embedding over adaptive neighborhoods.
//!
//! Three steps: build the (generally asymmetric) k*-nearest-neighbor
//! adjacency, solve each point's affine reconstruction weights over its own
//! neighborhood, then take the bottom non-constant eigenvectors of
//! (I - W)^T (I - W) as coordinates, centered and scaled to unit covariance.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::dataset::PointCloud;
use crate::error::{Error, Result};
use crate::graph::{adaptive_adjacency, connected_components, SparseWeights};
use crate::linalg::{constrained_lsq_weights, sym_eigs_smallest_op_deflated, SymOp};
use crate::neighbors::build_neighbor_table;

/// An n x d_proj coordinate table produced by any embedder.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub coords: Array2<f64>,
    pub d_proj: usize,
    pub method_tag: String,
}

impl Embedding {
    pub fn n(&self) -> usize {
        self.coords.nrows()
    }
}

/// The quadratic form (I - W)^T (I - W), applied matrix-free, with the
/// constant direction shifted out of the small end of the spectrum: the
/// centering constraint turned into deflation. Row sums of W are 1, so the
/// all-ones vector is an exact null vector of I - W; adding
/// `shift * mean(v) * 1` moves it to eigenvalue `shift`.
struct ReconstructionQuadratic<'a> {
    weights: &'a SparseWeights,
    shift: f64,
}

impl SymOp for ReconstructionQuadratic<'_> {
    fn order(&self) -> usize {
        self.weights.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.weights.n();
        // t = (I - W) x
        let mut t = vec![0.0; n];
        self.weights.matvec(x, &mut t);
        for i in 0..n {
            t[i] = x[i] - t[i];
        }
        // y = (I - W)^T t
        self.weights.matvec_transpose(&t, y);
        for i in 0..n {
            y[i] = t[i] - y[i];
        }
        let mean = x.iter().sum::<f64>() / n as f64;
        let bump = self.shift * mean;
        for item in y.iter_mut() {
            *item += bump;
        }
    }
}

/// Adaptive locally linear embedding with per-point neighbor orders.
pub fn lle_star(cloud: &PointCloud, k_star: &[usize], d_proj: usize) -> Result<Embedding> {
    let n = cloud.n();
    if d_proj == 0 || d_proj > cloud.dim() || d_proj > n.saturating_sub(2) {
        return Err(Error::InvalidArgument(format!(
            "projection dimension {d_proj} must lie in [1, min(D, n - 2)]"
        )));
    }
    if k_star.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: k_star.len(),
        });
    }
    let depth = *k_star.iter().max().expect("nonempty k_star");
    let table = build_neighbor_table(cloud, depth)?;
    let adjacency = adaptive_adjacency(&table, k_star)?;

    let (components, component_of) = connected_components(&adjacency);
    if components > 1 {
        // Reconstruction stays well-posed per component; the embedding then
        // carries component-indicator modes at the bottom of the spectrum,
        // which is exactly the structure downstream clustering wants.
        log::warn!("neighborhood graph has {components} connected components");
    }

    // Per-row affine reconstruction weights.
    let rows: Vec<Result<Vec<(u32, f64)>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ids = &table.ids_row(i)[..k_star[i]];
            let mut nbrs = Array2::zeros((ids.len(), cloud.dim()));
            for (a, &j) in ids.iter().enumerate() {
                nbrs.row_mut(a).assign(&cloud.row(j as usize));
            }
            let w = constrained_lsq_weights(cloud.row(i), nbrs.view())?;
            let mut row: Vec<(u32, f64)> = ids.iter().copied().zip(w).collect();
            row.sort_unstable_by_key(|&(j, _)| j);
            Ok(row)
        })
        .collect();
    let mut weight_rows = Vec::with_capacity(n);
    for (i, row) in rows.into_iter().enumerate() {
        weight_rows.push(row.map_err(|e| Error::Row {
            row: i,
            source: Box::new(e),
        })?);
    }
    let weights = SparseWeights::from_rows(n, weight_rows)?;

    let coords = reconstruction_eigenmap(&weights, d_proj, components, &component_of)?;
    Ok(Embedding {
        coords,
        d_proj,
        method_tag: "lle".into(),
    })
}

/// Orthonormal basis of the component-indicator span with the global
/// constant projected out: the exact kernel directions of the
/// reconstruction quadratic that encode which component each point is in.
/// Deterministic: components are taken in order of their smallest member.
pub(crate) fn component_contrasts(components: usize, component_of: &[usize]) -> Vec<Vec<f64>> {
    let n = component_of.len();
    if components <= 1 {
        return Vec::new();
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(components - 1);
    // Components are already numbered by first appearance; skip the last to
    // leave the span of {indicators} ⊖ global-constant covered.
    for comp in 0..components - 1 {
        let mut v: Vec<f64> = component_of
            .iter()
            .map(|&c| if c == comp { 1.0 } else { 0.0 })
            .collect();
        // Project out the global constant, then earlier contrasts.
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        for u in &basis {
            let c: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (x, b) in v.iter_mut().zip(u) {
                *x -= c * b;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

/// Classical fixed-k LLE: the adaptive routine with a constant neighbor
/// order.
pub fn lle_fixed(cloud: &PointCloud, k: usize, d_proj: usize) -> Result<Embedding> {
    lle_star(cloud, &vec![k; cloud.n()], d_proj)
}

/// Bottom d_proj eigenvectors of the reconstruction quadratic (constant
/// direction deflated), centered, columns scaled to norm sqrt(n) so the
/// embedding covariance is the identity.
fn reconstruction_eigenmap(
    weights: &SparseWeights,
    d_proj: usize,
    components: usize,
    component_of: &[usize],
) -> Result<Array2<f64>> {
    let n = weights.n();
    // The deflation shift only has to clear the wanted (small) end of the
    // spectrum; a power-iteration estimate of the spectral radius keeps it
    // tight, where a norm-product bound can overshoot by orders of magnitude
    // and crush the shifted spectrum the eigensolver works on.
    let probe = ReconstructionQuadratic { weights, shift: 0.0 };
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let bits = crate::rng::splitmix64(0x9e37 ^ i as u64);
            bits as f64 / u64::MAX as f64 - 0.5
        })
        .collect();
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= nx);
    let mut y = vec![0.0; n];
    let mut lam_max = 0.0f64;
    for _ in 0..40 {
        probe.apply(&x, &mut y);
        let num: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        lam_max = lam_max.max(num.abs());
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ny == 0.0 {
            break;
        }
        for i in 0..n {
            x[i] = y[i] / ny;
        }
    }
    let shift = 1.25 * lam_max + 1.0;

    // Component contrasts are exact kernel vectors (row sums of W are 1 and
    // the support never crosses components, so (I - W) annihilates every
    // indicator; being orthogonal to the constant they also pass the
    // deflation shift untouched). Handing them to the solver keeps an
    // iterative run from returning arbitrary mixtures out of the
    // near-degenerate bottom cluster.
    let contrasts = component_contrasts(components, component_of);
    let op = ReconstructionQuadratic { weights, shift };
    let (_, vecs) = sym_eigs_smallest_op_deflated(&op, d_proj, &contrasts)?;

    let mut coords = vecs;
    finalize_embedding(&mut coords);
    Ok(coords)
}

/// Deterministic sign convention: flip each column so its largest-magnitude
/// entry is positive (eigenvector signs are otherwise solver-dependent).
pub(crate) fn canonicalize_signs(coords: &mut Array2<f64>) {
    for mut col in coords.columns_mut() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for (r, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = r;
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
}

/// Post-processing for the reconstruction embedding: deterministic column
/// signs, exact centering, columns scaled to norm sqrt(n) so the embedding
/// covariance is the identity.
pub(crate) fn finalize_embedding(coords: &mut Array2<f64>) {
    let n = coords.nrows();
    canonicalize_signs(coords);
    for mut col in coords.columns_mut() {
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        let norm = col.dot(&col).sqrt();
        if norm > 0.0 {
            let scale = (n as f64).sqrt() / norm;
            col.mapv_inplace(|v| v * scale);
        }
    }
}

/// Pairwise Euclidean distance matrix of embedding rows; test and diagnostic
/// helper (embeddings are only defined up to rotation, distances are not).
pub fn pairwise_distances(coords: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = coords.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = coords
                .row(i)
                .iter()
                .zip(coords.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    out
}
