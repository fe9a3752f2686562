//! Lloyd iterations with k-means++ seeding, best of several restarts.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::mix;

const RESTARTS: usize = 10;
const MAX_ITERS: usize = 300;
const SHIFT_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct KmeansFit {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
}

/// K-means with k-means++ initialization; deterministic given `seed`, best
/// inertia over 10 restarts, Lloyd steps until the largest centroid shift
/// drops below 1e-6 or 300 iterations.
pub fn kmeans(data: ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<KmeansFit> {
    let n = data.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cluster count {k} must lie in [1, n = {n}]"
        )));
    }
    let mut best: Option<KmeansFit> = None;
    for restart in 0..RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, restart as u64]));
        let fit = lloyd(data, k, &mut rng);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lloyd(data: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> KmeansFit {
    let n = data.nrows();
    let d = data.ncols();
    let row = |i: usize| data.row(i).to_slice().expect("contiguous rows");

    // k-means++ seeding.
    let mut centroids = Array2::zeros((k, d));
    let first = (rng.random::<f64>() * n as f64) as usize % n;
    centroids.row_mut(0).assign(&data.row(first));
    let mut nearest_sq = vec![f64::INFINITY; n];
    for c in 1..k {
        for i in 0..n {
            let prev = centroids.row(c - 1);
            let dsq = sq_dist(row(i), prev.to_slice().expect("contiguous"));
            if dsq < nearest_sq[i] {
                nearest_sq[i] = dsq;
            }
        }
        let total: f64 = nearest_sq.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in nearest_sq.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            (rng.random::<f64>() * n as f64) as usize % n
        };
        centroids.row_mut(c).assign(&data.row(pick));
    }

    let mut labels = vec![0usize; n];
    let mut prev_inertia = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        // Assign: ties to the lowest centroid index.
        let mut assign_inertia = 0.0;
        for i in 0..n {
            let mut best_c = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let dsq = sq_dist(row(i), centroids.row(c).to_slice().expect("contiguous"));
                if dsq < best_d {
                    best_d = dsq;
                    best_c = c;
                }
            }
            labels[i] = best_c;
            assign_inertia += best_d;
        }
        // Lloyd never increases the objective (re-seeding aside, which only
        // ever moves a centroid onto a far point, shrinking its term).
        debug_assert!(
            assign_inertia <= prev_inertia * (1.0 + 1e-12) + 1e-12,
            "Lloyd objective rose: {prev_inertia} -> {assign_inertia}"
        );
        prev_inertia = assign_inertia;
        // Update.
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            let mut target = sums.row_mut(labels[i]);
            target += &data.row(i);
        }
        let mut reseeded = false;
        let mut new_centroids = centroids.clone();
        for c in 0..k {
            if counts[c] > 0 {
                for col in 0..d {
                    new_centroids[(c, col)] = sums[(c, col)] / counts[c] as f64;
                }
            } else {
                // Empty cluster: re-seed at the point farthest from its
                // centroid.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(row(a), centroids.row(labels[a]).to_slice().unwrap());
                        let db = sq_dist(row(b), centroids.row(labels[b]).to_slice().unwrap());
                        da.partial_cmp(&db).unwrap()
                    })
                    .expect("nonempty data");
                new_centroids.row_mut(c).assign(&data.row(far));
                reseeded = true;
            }
        }
        if reseeded {
            prev_inertia = f64::INFINITY;
        }
        let shift = (0..k)
            .map(|c| {
                sq_dist(
                    centroids.row(c).to_slice().unwrap(),
                    new_centroids.row(c).to_slice().unwrap(),
                )
                .sqrt()
            })
            .fold(0.0f64, f64::max);
        centroids = new_centroids;
        if shift < SHIFT_TOL {
            break;
        }
    }

    // Final assignment and inertia.
    let mut inertia = 0.0;
    for i in 0..n {
        let mut best_c = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let dsq = sq_dist(row(i), centroids.row(c).to_slice().unwrap());
            if dsq < best_d {
                best_d = dsq;
                best_c = c;
            }
        }
        labels[i] = best_c;
        inertia += best_d;
    }
    KmeansFit {
        labels,
        centroids,
        inertia,
    }
}
