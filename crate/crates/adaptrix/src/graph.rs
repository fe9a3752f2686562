//! Sparse adjacency and weight matrices over adaptive neighborhoods, shared
//! by every embedder.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::neighbors::NeighborTable;

/// Row-major sparse matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeights {
    n: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

impl SparseWeights {
    /// Build from per-row (column, weight) lists; entries are sorted and
    /// checked for duplicates.
    pub fn from_rows(n: usize, mut rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: rows.len(),
            });
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable_by_key(|&(j, _)| j);
            for pair in row.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate entry ({i}, {}) in sparse matrix",
                        pair[0].0
                    )));
                }
            }
            if let Some(&(j, w)) = row.iter().find(|&&(j, w)| j as usize >= n || !w.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "bad sparse entry ({i}, {j}) = {w}"
                )));
            }
        }
        Ok(Self { n, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Stored weight at (i, j), or 0 when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.rows[i].binary_search_by_key(&(j as u32), |&(c, _)| c) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, w)| w).sum()
    }

    /// y = S x.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(j, w) in row {
                acc += w * x[j as usize];
            }
            y[i] = acc;
        }
    }

    /// y = S^T x (accumulating scatter).
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        y.fill(0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let xi = x[i];
            for &(j, w) in row {
                y[j as usize] += w * xi;
            }
        }
    }

    /// Largest relative asymmetry max |S_ij - S_ji| / max|S|; 0 for empty.
    pub fn asymmetry(&self) -> f64 {
        let mut max_abs = 0.0f64;
        let mut max_diff = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                max_abs = max_abs.max(w.abs());
                max_diff = max_diff.max((w - self.get(j as usize, i)).abs());
            }
        }
        if max_abs == 0.0 {
            0.0
        } else {
            max_diff / max_abs
        }
    }

    /// Debug export as `i,j,w` triplets.
    pub fn save_triplets(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                writeln!(out, "{i},{j},{w}").expect("string write");
            }
        }
        std::fs::write(path, out).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Unit-weight adjacency whose row i holds exactly the `k_star[i]` nearest
/// neighbors of point i. Generally asymmetric.
pub fn adaptive_adjacency(table: &NeighborTable, k_star: &[usize]) -> Result<SparseWeights> {
    if k_star.len() != table.n() {
        return Err(Error::DimensionMismatch {
            expected: table.n(),
            actual: k_star.len(),
        });
    }
    if let Some((i, _)) = k_star.iter().enumerate().find(|&(_, &k)| k == 0) {
        return Err(Error::InvalidArgument(format!(
            "k_star[{i}] must be at least 1"
        )));
    }
    if let Some(&k) = k_star.iter().find(|&&k| k > table.depth()) {
        return Err(Error::TableTooShallow {
            depth: table.depth(),
            needed: k,
        });
    }
    let rows: Vec<Vec<(u32, f64)>> = (0..table.n())
        .into_par_iter()
        .map(|i| {
            let mut row: Vec<(u32, f64)> = table.ids_row(i)[..k_star[i]]
                .iter()
                .map(|&j| (j, 1.0))
                .collect();
            row.sort_unstable_by_key(|&(j, _)| j);
            row
        })
        .collect();
    Ok(SparseWeights {
        n: table.n(),
        rows,
    })
}

/// How to combine the two orientations of each edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetrizeMode {
    /// max(a_ij, a_ji): union connectivity.
    Or,
    /// min(a_ij, a_ji): mutual-neighbor intersection.
    And,
    /// (a_ij + a_ji) / 2.
    Mean,
    /// a_ij + a_ji - a_ij * a_ji, the probabilistic t-conorm.
    FuzzyUnion,
}

/// Symmetrize a square sparse matrix; missing entries count as 0.
pub fn symmetrize(a: &SparseWeights, mode: SymmetrizeMode) -> SparseWeights {
    let n = a.n;
    // Collect the transposed entries per row first.
    let mut transposed: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for (i, row) in a.rows.iter().enumerate() {
        for &(j, w) in row {
            transposed[j as usize].push((i as u32, w));
        }
    }
    let rows: Vec<Vec<(u32, f64)>> = (0..n)
        .map(|i| {
            let mut merged: Vec<(u32, f64, f64)> = Vec::with_capacity(a.rows[i].len());
            for &(j, w) in &a.rows[i] {
                merged.push((j, w, 0.0));
            }
            for &(j, w) in &transposed[i] {
                match merged.binary_search_by_key(&j, |&(c, _, _)| c) {
                    Ok(pos) => merged[pos].2 = w,
                    Err(pos) => merged.insert(pos, (j, 0.0, w)),
                }
            }
            merged
                .into_iter()
                .filter_map(|(j, fwd, bwd)| {
                    let w = match mode {
                        SymmetrizeMode::Or => fwd.max(bwd),
                        SymmetrizeMode::And => fwd.min(bwd),
                        SymmetrizeMode::Mean => 0.5 * (fwd + bwd),
                        SymmetrizeMode::FuzzyUnion => fwd + bwd - fwd * bwd,
                    };
                    (w != 0.0).then_some((j, w))
                })
                .collect()
        })
        .collect();
    SparseWeights { n, rows }
}

/// Connected components of the undirected support of `a` (an edge in either
/// orientation connects). Returns (component count, per-vertex component id).
pub fn connected_components(a: &SparseWeights) -> (usize, Vec<usize>) {
    let n = a.n();
    let mut undirected: Vec<Vec<u32>> = vec![Vec::new(); n];
    for i in 0..n {
        for &(j, _) in a.row(i) {
            undirected[i].push(j);
            undirected[j as usize].push(i as u32);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = count;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &u in &undirected[v] {
                let u = u as usize;
                if comp[u] == usize::MAX {
                    comp[u] = count;
                    stack.push(u);
                }
            }
        }
        count += 1;
    }
    (count, comp)
}
