//! Symmetric eigensolver and equality-constrained least squares, the two
//! numerical kernels every embedder needs.
//!
//! Small problems (n <= 2000) go through Householder tridiagonalization plus
//! implicit-shift QL; larger ones through shifted Lanczos with full
//! reorthogonalization against the running basis. Both paths are
//! deterministic: the Lanczos start vector comes from a fixed internal seed.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::SparseWeights;
use crate::rng::substream;

/// Order below which the dense path is used unconditionally.
const DENSE_CUTOFF: usize = 2000;
/// Relative residual target for iterative eigenpairs, scaled by the shift
/// (an upper bound on the spectral radius).
const LANCZOS_TOL: f64 = 1e-9;
const LANCZOS_MAX_BASIS: usize = 700;

/// Anything that can act as a symmetric linear operator.
pub trait SymOp: Sync {
    fn order(&self) -> usize;
    /// y = A x.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl SymOp for SparseWeights {
    fn order(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y);
    }
}

/// The `m` algebraically smallest eigenpairs of a symmetric sparse matrix,
/// eigenvalues ascending, eigenvectors orthonormal in the columns of the
/// returned matrix.
pub fn sym_eigs_smallest(matrix: &SparseWeights, m: usize) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = matrix.n();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "requested {m} eigenpairs of an order-{n} matrix"
        )));
    }
    if matrix.asymmetry() > 1e-10 {
        return Err(Error::InvalidArgument(
            "matrix is not symmetric within 1e-10 relative".into(),
        ));
    }
    if n <= DENSE_CUTOFF {
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for &(j, w) in matrix.row(i) {
                dense[i * n + j as usize] = w;
            }
        }
        let (vals, vecs) = dense_sym_eigs(dense, n)?;
        Ok(take_smallest(vals, vecs, n, m))
    } else {
        lanczos_smallest(matrix, m, &[])
    }
}

/// As [`sym_eigs_smallest`] for a matrix-free operator. The caller guarantees
/// symmetry; it cannot be checked here.
pub fn sym_eigs_smallest_op(op: &dyn SymOp, m: usize) -> Result<(Vec<f64>, Array2<f64>)> {
    sym_eigs_smallest_op_deflated(op, m, &[])
}

/// As [`sym_eigs_smallest_op`] with analytically known eigenvectors.
///
/// `known_kernel` holds orthonormal exact eigenvectors (typically graph
/// component indicators, eigenvalue ~ 0) that iterative solvers could only
/// recover as arbitrary mixtures out of a tightly clustered bottom; passing
/// them here locks them verbatim and restricts the iteration to their
/// complement. Ignored on the dense path, which resolves the full spectrum
/// anyway.
pub fn sym_eigs_smallest_op_deflated(
    op: &dyn SymOp,
    m: usize,
    known_kernel: &[Vec<f64>],
) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = op.order();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "requested {m} eigenpairs of an order-{n} operator"
        )));
    }
    if n <= DENSE_CUTOFF {
        // Materialize through basis vectors; cheap at this size.
        let mut dense = vec![0.0; n * n];
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        for j in 0..n {
            x[j] = 1.0;
            op.apply(&x, &mut y);
            for i in 0..n {
                dense[i * n + j] = y[i];
            }
            x[j] = 0.0;
        }
        // Symmetrize away round-off so QL sees an exactly symmetric input.
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (dense[i * n + j] + dense[j * n + i]);
                dense[i * n + j] = avg;
                dense[j * n + i] = avg;
            }
        }
        let (vals, vecs) = dense_sym_eigs(dense, n)?;
        Ok(take_smallest(vals, vecs, n, m))
    } else {
        lanczos_smallest(op, m, known_kernel)
    }
}

fn take_smallest(vals: Vec<f64>, vecs: Vec<f64>, n: usize, m: usize) -> (Vec<f64>, Array2<f64>) {
    // Dense results arrive ascending; keep the first m columns.
    let mut out = Array2::zeros((n, m));
    for c in 0..m {
        for r in 0..n {
            out[(r, c)] = vecs[r * n + c];
        }
    }
    (vals[..m].to_vec(), out)
}

// ---------------------------------------------------------------------------
// Dense path: tred2 + tql2
// ---------------------------------------------------------------------------

/// Full eigendecomposition of a dense symmetric matrix (row-major, order n);
/// eigenvalues ascending, eigenvectors in matching columns.
fn dense_sym_eigs(mut v: Vec<f64>, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e, n);
    tql2(&mut v, &mut d, &mut e, n)?;
    Ok((d, v))
}

/// Householder reduction to tridiagonal form with accumulated transform.
fn tred2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    d.copy_from_slice(&v[(n - 1) * n..]);

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
                v[j * n + i] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }

            for j in 0..i {
                let f = d[j];
                v[j * n + i] = f;
                let mut g = e[j] + v[j * n + j] * f;
                for k in (j + 1)..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate transformations.
    for i in 0..(n - 1) {
        v[(n - 1) * n + i] = v[i * n + i];
        v[i * n + i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k * n + i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k * n + i + 1] * v[k * n + j];
                }
                for k in 0..=i {
                    v[k * n + j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k * n + i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
        v[(n - 1) * n + j] = 0.0;
    }
    v[(n - 1) * n + n - 1] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL on a tridiagonal matrix, rotating the accumulated
/// transform along; sorts eigenpairs ascending.
fn tql2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    let eps = 2.0f64.powi(-52);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::EigenNonConvergence {
                        iterations: iter,
                        residual: e[l].abs(),
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0f64;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0f64;
                let mut s2 = 0.0f64;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[k * n + i + 1];
                        v[k * n + i + 1] = s * v[k * n + i] + c * h;
                        v[k * n + i] = c * v[k * n + i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Selection sort ascending, moving eigenvector columns along.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for j in (i + 1)..n {
            if d[j] < p {
                k = j;
                p = d[j];
            }
        }
        if k != i {
            d.swap(i, k);
            for r in 0..n {
                v.swap(r * n + i, r * n + k);
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Iterative path: shifted Lanczos with full reorthogonalization
// ---------------------------------------------------------------------------

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Smallest `m` eigenpairs of a PSD-ish symmetric operator.
///
/// Runs Lanczos on sigma*I - A (sigma estimated by power iteration) so the
/// smallest eigenvalues of A sit at the top of the shifted spectrum, with
/// full reorthogonalization against the basis. A single Krylov space carries
/// at most one copy of each degenerate eigenvalue, so converged Ritz pairs
/// are locked, deflated, and the iteration restarts from a fresh random
/// vector until `m` pairs are in hand.
fn lanczos_smallest(
    op: &dyn SymOp,
    m: usize,
    known_kernel: &[Vec<f64>],
) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = op.order();
    let mut rng = substream(0x5eed, "lanczos");

    // Power iteration for a spectral-radius estimate.
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut y = vec![0.0; n];
    let mut lam_max = 0.0f64;
    for _ in 0..60 {
        op.apply(&x, &mut y);
        lam_max = dot(&x, &y).abs().max(lam_max);
        let ny = norm(&y);
        if ny == 0.0 {
            break;
        }
        for i in 0..n {
            x[i] = y[i] / ny;
        }
    }
    let sigma = 1.05 * lam_max + 1e-12;
    let tol = LANCZOS_TOL * sigma.max(1e-300);

    let shifted_apply = |v: &[f64], out: &mut [f64]| {
        op.apply(v, out);
        for i in 0..n {
            out[i] = sigma * v[i] - out[i];
        }
    };
    let orth_against = |w: &mut [f64], dirs: &[Vec<f64>]| {
        for _ in 0..2 {
            for u in dirs {
                let c = dot(w, u);
                for i in 0..n {
                    w[i] -= c * u[i];
                }
            }
        }
    };

    let mut locked_vals: Vec<f64> = Vec::new();
    let mut locked_vecs: Vec<Vec<f64>> = Vec::new();
    let mut y_scratch = vec![0.0; n];
    for v in known_kernel {
        debug_assert_eq!(v.len(), n);
        op.apply(v, &mut y_scratch);
        locked_vals.push(dot(v, &y_scratch));
        locked_vecs.push(v.clone());
    }
    let mut total_iters = 0usize;
    let max_rounds = 4 * m + 8;
    // A single Krylov space carries one copy of each eigenvalue, so having m
    // converged pairs is not enough: a further deflated round must certify
    // that the smallest eigenvalue left in the complement does not undercut
    // the m-th locked one (which would mean a missed duplicate).
    let mut certified = false;
    // Wide enough to absorb the loosest locking tier's eigenvalue fuzz.
    let slack = 1e-4 * sigma.max(1e-300);

    'rounds: for _round in 0..max_rounds {
        if locked_vals.len() >= m && certified {
            break;
        }
        let mth_smallest = if locked_vals.len() >= m {
            let mut sorted = locked_vals.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Some(sorted[m - 1])
        } else {
            None
        };

        // Fresh start direction in the deflated complement.
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        orth_against(&mut v, &locked_vecs);
        let nv = norm(&v);
        if nv <= 1e-13 {
            certified = true; // complement exhausted
            break 'rounds;
        }
        v.iter_mut().for_each(|x| *x /= nv);

        let cap = LANCZOS_MAX_BASIS.min(n - locked_vals.len());
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cap.min(256));
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut w = vec![0.0; n];

        loop {
            shifted_apply(&v, &mut w);
            let alpha = dot(&w, &v);
            for i in 0..n {
                w[i] -= alpha * v[i];
            }
            if let Some(prev) = basis.last() {
                let b = *betas.last().unwrap();
                for i in 0..n {
                    w[i] -= b * prev[i];
                }
            }
            orth_against(&mut w, &locked_vecs);
            orth_against(&mut w, &basis);
            let c = dot(&w, &v);
            for i in 0..n {
                w[i] -= c * v[i];
            }

            basis.push(std::mem::take(&mut v));
            alphas.push(alpha);
            total_iters += 1;
            let j = basis.len();

            let beta = norm(&w);
            let breakdown = beta <= 1e-13 * sigma.max(1.0);
            let at_cap = j >= cap;
            if !breakdown && !at_cap {
                betas.push(beta);
                v = w.iter().map(|x| x / beta).collect();
                if j % 25 != 0 {
                    continue;
                }
            }

            // Ritz analysis of the current tridiagonal block. On breakdown
            // the Krylov space is invariant and every pair is exact.
            let beta_last = if breakdown { 0.0 } else { beta };
            let (theta, z) = tridiag_eigs(&alphas, &betas[..j - 1])?;
            let needed = m.saturating_sub(locked_vals.len()).max(1);
            let must_stop = breakdown || at_cap;
            let mut lock_count = 0;
            let mut worst_needed = 0.0f64;
            for t in 0..needed.min(j) {
                let col = j - 1 - t;
                let resid = (beta_last * z[(j - 1) * j + col]).abs();
                worst_needed = worst_needed.max(resid);
                if resid <= tol && lock_count == t {
                    lock_count = t + 1;
                }
            }
            if lock_count == 0 && at_cap {
                // Tightly clustered eigenvalues: individual pairs may never
                // separate at the working tolerance in any Krylov space of
                // bounded size, while the spanned subspace is long since
                // accurate. Accept the exhausted space at progressively
                // looser per-pair tolerances before giving up.
                for loose in [1e2, 1e4] {
                    let tier = tol * loose;
                    for t in 0..needed.min(j) {
                        let col = j - 1 - t;
                        let resid = (beta_last * z[(j - 1) * j + col]).abs();
                        if resid <= tier && lock_count == t {
                            lock_count = t + 1;
                        }
                    }
                    if lock_count > 0 {
                        break;
                    }
                }
            }
            if lock_count > 0 && (must_stop || lock_count >= needed) {
                for t in 0..lock_count {
                    let col = j - 1 - t;
                    let mut ritz = vec![0.0; n];
                    for (l, u) in basis.iter().enumerate() {
                        let s = z[l * j + col];
                        if s != 0.0 {
                            for r in 0..n {
                                ritz[r] += s * u[r];
                            }
                        }
                    }
                    // Safety cleanup against earlier locks.
                    orth_against(&mut ritz, &locked_vecs);
                    let nr = norm(&ritz);
                    if nr <= 1e-13 {
                        continue;
                    }
                    ritz.iter_mut().for_each(|x| *x /= nr);
                    locked_vals.push(sigma - theta[col]);
                    locked_vecs.push(ritz);
                }
                // The first locked pair of this round is the smallest
                // eigenvalue that remained in the complement; if it does not
                // undercut the previous m-th smallest, the locked set is
                // complete.
                if let Some(kth) = mth_smallest {
                    let round_min = sigma - theta[j - 1];
                    if round_min >= kth - slack {
                        certified = true;
                    }
                }
                continue 'rounds;
            }
            if must_stop {
                if breakdown {
                    // Nothing converged in an exhausted subspace can only
                    // happen on a zero start; retry with a new vector.
                    continue 'rounds;
                }
                return Err(Error::EigenNonConvergence {
                    iterations: total_iters,
                    residual: worst_needed,
                });
            }
        }
    }

    if locked_vals.len() < m || !certified {
        return Err(Error::EigenNonConvergence {
            iterations: total_iters,
            residual: f64::NAN,
        });
    }

    // Ascending in the original spectrum.
    let mut order: Vec<usize> = (0..locked_vals.len()).collect();
    order.sort_by(|&a, &b| locked_vals[a].partial_cmp(&locked_vals[b]).unwrap());
    order.truncate(m);
    let vals: Vec<f64> = order.iter().map(|&i| locked_vals[i]).collect();
    let mut vecs = Array2::zeros((n, m));
    for (c, &i) in order.iter().enumerate() {
        for r in 0..n {
            vecs[(r, c)] = locked_vecs[i][r];
        }
    }
    Ok((vals, vecs))
}

/// Eigen-decompose the Lanczos tridiagonal; returns (theta, S) with theta
/// ascending in the shifted spectrum.
fn tridiag_eigs(alphas: &[f64], betas: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let j = alphas.len();
    let mut d = alphas.to_vec();
    // tql2 reads the off-diagonal from e[1..].
    let mut e = vec![0.0; j];
    for i in 1..j {
        e[i] = betas[i - 1];
    }
    let mut z = vec![0.0; j * j];
    for i in 0..j {
        z[i * j + i] = 1.0;
    }
    tql2(&mut z, &mut d, &mut e, j)?;
    Ok((d, z))
}

// ---------------------------------------------------------------------------
// Constrained least squares
// ---------------------------------------------------------------------------

/// Affine reconstruction weights: minimize ||x - sum_j w_j n_j||^2 subject to
/// sum_j w_j = 1, through the local Gram system with ridge
/// eps * trace(G) / k on the diagonal. The Gram matrix is exactly singular
/// whenever the neighbor count exceeds the ambient dimension, hence the
/// heavy ridge there; otherwise the ridge is a formality and exact local
/// reconstructions stay exact.
pub fn constrained_lsq_weights(
    x: ArrayView1<'_, f64>,
    neighbors: ArrayView2<'_, f64>,
) -> Result<Vec<f64>> {
    let eps = if neighbors.nrows() > x.len() { 1e-3 } else { 1e-12 };
    constrained_lsq_weights_with_ridge(x, neighbors, eps)
}

/// As [`constrained_lsq_weights`] with an explicit ridge scale; escalates a
/// hundredfold at a time if the factorization fails outright.
pub fn constrained_lsq_weights_with_ridge(
    x: ArrayView1<'_, f64>,
    neighbors: ArrayView2<'_, f64>,
    eps: f64,
) -> Result<Vec<f64>> {
    let k = neighbors.nrows();
    let dim = x.len();
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one neighbor".into()));
    }
    if neighbors.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: neighbors.ncols(),
        });
    }

    // Centered differences z_a = x - n_a; G = Z Z^T.
    let mut z = vec![0.0; k * dim];
    for a in 0..k {
        for c in 0..dim {
            z[a * dim + c] = x[c] - neighbors[(a, c)];
        }
    }
    let mut g = vec![0.0; k * k];
    for a in 0..k {
        for b in a..k {
            let s = dot(&z[a * dim..(a + 1) * dim], &z[b * dim..(b + 1) * dim]);
            g[a * k + b] = s;
            g[b * k + a] = s;
        }
    }
    let trace: f64 = (0..k).map(|a| g[a * k + a]).sum();
    if trace <= 0.0 {
        // Every neighbor coincides with x; any convex combination
        // reconstructs it exactly.
        return Ok(vec![1.0 / k as f64; k]);
    }

    let mut eps = eps;
    for _attempt in 0..8 {
        let mut reg = g.clone();
        let ridge = eps * trace / k as f64;
        for a in 0..k {
            reg[a * k + a] += ridge;
        }
        let mut w = vec![1.0; k];
        if cholesky_solve(&mut reg, &mut w, k) {
            let sum: f64 = w.iter().sum();
            if sum.abs() > 1e-300 && sum.is_finite() {
                w.iter_mut().for_each(|v| *v /= sum);
                if w.iter().all(|v| v.is_finite()) {
                    return Ok(w);
                }
            }
        }
        eps = eps.max(1e-15) * 100.0;
    }
    Err(Error::DegenerateGeometry(
        "local Gram system unsolvable even with heavy regularization".into(),
    ))
}

/// In-place Cholesky solve of A x = b for SPD A (row-major, order k);
/// returns false if a non-positive pivot appears.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], k: usize) -> bool {
    // Decompose A = L L^T.
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for p in 0..j {
                s -= a[i * k + p] * a[j * k + p];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                a[i * k + i] = s.sqrt();
            } else {
                a[i * k + j] = s / a[j * k + j];
            }
        }
    }
    // Forward then back substitution.
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s -= a[i * k + p] * b[p];
        }
        b[i] = s / a[i * k + i];
    }
    for i in (0..k).rev() {
        let mut s = b[i];
        for p in (i + 1)..k {
            s -= a[p * k + i] * b[p];
        }
        b[i] = s / a[i * k + i];
    }
    true
}
