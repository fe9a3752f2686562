//! Spectral embedding and clustering on the adaptive neighborhood graph.
//!
//! The adjacency is or-symmetrized, the symmetric normalized Laplacian
//! L = I - D^{-1/2} A D^{-1/2} assembled explicitly, and the eigenvectors of
//! its smallest nonzero eigenvalues taken as coordinates, with rows
//! renormalized to the unit sphere before K-means.

use ndarray::Array2;

use crate::dataset::PointCloud;
use crate::error::{Error, Result};
use crate::evaluate::kmeans;
use crate::graph::{adaptive_adjacency, connected_components, symmetrize, SparseWeights, SymmetrizeMode};
use crate::linalg::sym_eigs_smallest;
use crate::lle::{canonicalize_signs, Embedding};
use crate::neighbors::build_neighbor_table;

/// Eigenvalues at or below this are treated as zero (connected-component
/// modes).
const ZERO_EIGENVALUE_CUTOFF: f64 = 1e-8;

/// Diagnostics of a spectral embedding run.
#[derive(Debug, Clone, Copy)]
pub struct SpectralInfo {
    /// Connected components of the symmetrized graph.
    pub n_components: usize,
}

/// Adaptive spectral embedding; rows renormalized (Ng-Jordan-Weiss).
pub fn spectral_embed_star(
    cloud: &PointCloud,
    k_star: &[usize],
    d_proj: usize,
) -> Result<Embedding> {
    spectral_embed_star_with_info(cloud, k_star, d_proj).map(|(e, _)| e)
}

/// As [`spectral_embed_star`], also reporting the component count (a
/// disconnected graph embeds per component and is logged as a warning).
pub fn spectral_embed_star_with_info(
    cloud: &PointCloud,
    k_star: &[usize],
    d_proj: usize,
) -> Result<(Embedding, SpectralInfo)> {
    let n = cloud.n();
    if d_proj == 0 || d_proj > n.saturating_sub(2) {
        return Err(Error::InvalidArgument(format!(
            "projection dimension {d_proj} must lie in [1, n - 2]"
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
    let sym = symmetrize(&adjacency, SymmetrizeMode::Or);
    let (emb, info) = spectral_embed_graph(&sym, d_proj, true)?;
    Ok((
        Embedding {
            method_tag: "spectral".into(),
            ..emb
        },
        info,
    ))
}

/// Spectral embedding of a prebuilt symmetric weighted graph.
///
/// The embedding takes the eigenvectors above the principal zero mode: the
/// kernel of the normalized Laplacian is spanned by the per-component
/// vectors D^{1/2}·1_C, which are computed exactly; the direction aligned
/// with the global D^{1/2}·1 is dropped (the trivial mode) and the
/// remaining kernel contrasts — the component structure — lead the
/// embedding, followed by the smallest positive modes.
pub(crate) fn spectral_embed_graph(
    sym: &SparseWeights,
    d_proj: usize,
    renormalize_rows: bool,
) -> Result<(Embedding, SpectralInfo)> {
    let n = sym.n();
    if d_proj > n {
        return Err(Error::InvalidArgument(format!(
            "projection dimension {d_proj} exceeds matrix order {n}"
        )));
    }
    let mut degree = vec![0.0f64; n];
    for i in 0..n {
        degree[i] = sym.row_sum(i);
        if degree[i] <= 0.0 {
            return Err(Error::IsolatedVertex { index: i });
        }
    }
    let (n_components, component_of) = connected_components(sym);
    if n_components > 1 {
        log::warn!(
            "neighborhood graph has {n_components} connected components; embedding per component"
        );
    }

    // L = I - D^{-1/2} A D^{-1/2}; no self-loops in A, so the diagonal is 1.
    let inv_sqrt: Vec<f64> = degree.iter().map(|&d| 1.0 / d.sqrt()).collect();
    let rows: Vec<Vec<(u32, f64)>> = (0..n)
        .map(|i| {
            let mut row: Vec<(u32, f64)> = sym
                .row(i)
                .iter()
                .map(|&(j, w)| (j, -w * inv_sqrt[i] * inv_sqrt[j as usize]))
                .collect();
            match row.binary_search_by_key(&(i as u32), |&(c, _)| c) {
                Ok(pos) => row[pos].1 += 1.0,
                Err(pos) => row.insert(pos, (i as u32, 1.0)),
            }
            row
        })
        .collect();
    let laplacian = SparseWeights::from_rows(n, rows)?;

    // Exact kernel: D^{1/2} 1_C per component, orthogonalized against the
    // principal direction D^{1/2} 1 and each other (weighted contrasts).
    let principal: Vec<f64> = degree.iter().map(|&d| d.sqrt()).collect();
    let mut kernel: Vec<Vec<f64>> = Vec::with_capacity(n_components.saturating_sub(1));
    {
        let pnorm = principal.iter().map(|x| x * x).sum::<f64>().sqrt();
        let principal_unit: Vec<f64> = principal.iter().map(|x| x / pnorm).collect();
        for comp in 0..n_components.saturating_sub(1) {
            let mut v: Vec<f64> = (0..n)
                .map(|i| if component_of[i] == comp { principal[i] } else { 0.0 })
                .collect();
            let c: f64 = v.iter().zip(&principal_unit).map(|(a, b)| a * b).sum();
            for (x, p) in v.iter_mut().zip(&principal_unit) {
                *x -= c * p;
            }
            for u in &kernel {
                let c: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (x, b) in v.iter_mut().zip(u) {
                    *x -= c * b;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                v.iter_mut().for_each(|x| *x /= norm);
                kernel.push(v);
            }
        }
    }

    let n_contrasts = kernel.len().min(d_proj);
    let mut coords = Array2::zeros((n, d_proj));
    for c in 0..n_contrasts {
        for r in 0..n {
            coords[(r, c)] = kernel[c][r];
        }
    }
    if d_proj > n_contrasts {
        // Positive modes above the kernel; deflate the full kernel span
        // (principal included) so the iteration never wanders into it.
        let mut deflate = kernel.clone();
        let pnorm = principal.iter().map(|x| x * x).sum::<f64>().sqrt();
        deflate.push(principal.iter().map(|x| x / pnorm).collect());
        let want = d_proj - n_contrasts;
        let request = (want + deflate.len()).min(n);
        let (vals, vecs) =
            crate::linalg::sym_eigs_smallest_op_deflated(&laplacian, request, &deflate)?;
        // The deflated vectors come back at eigenvalue ~0; positive modes
        // follow them in the ascending order.
        let mut taken = 0;
        for (idx, &val) in vals.iter().enumerate() {
            if taken == want {
                break;
            }
            if val <= ZERO_EIGENVALUE_CUTOFF {
                continue;
            }
            coords
                .column_mut(n_contrasts + taken)
                .assign(&vecs.column(idx));
            taken += 1;
        }
        if taken < want {
            return Err(Error::EigenNonConvergence {
                iterations: 0,
                residual: f64::NAN,
            });
        }
    }

    canonicalize_signs(&mut coords);
    if renormalize_rows {
        for mut row in coords.rows_mut() {
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|v| v / norm);
            }
        }
    }
    Ok((
        Embedding {
            coords,
            d_proj,
            method_tag: "spectral".into(),
        },
        SpectralInfo { n_components },
    ))
}

/// Spectral embedding into `d_star` dimensions followed by K-means.
pub fn spectral_cluster_star(
    cloud: &PointCloud,
    k_star: &[usize],
    d_star: usize,
    n_clusters: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if n_clusters == 0 {
        return Err(Error::InvalidArgument("need at least one cluster".into()));
    }
    let (emb, _) = spectral_embed_star_with_info(cloud, k_star, d_star)?;
    let fit = kmeans(emb.coords.view(), n_clusters, seed)?;
    Ok(fit.labels)
}
