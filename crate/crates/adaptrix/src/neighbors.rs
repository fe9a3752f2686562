//! Exact k-nearest-neighbor tables under the Euclidean metric.
//!
//! Every estimator and embedder in this crate starts from one of these
//! tables, so correctness is non-negotiable: a kd-tree handles moderate
//! dimensions and everything else falls back to a brute-force scan that the
//! tree must agree with exactly, including the tie rule (ascending original
//! index on equal distance).

use ndarray::ArrayView1;
use rayon::prelude::*;

use crate::dataset::PointCloud;
use crate::error::{Error, Result};

/// Dimensions above which space partitioning stops paying for itself.
const KDTREE_MAX_DIM: usize = 15;
/// Neighbor orders at which scanning the whole cloud beats tree traversal.
const KDTREE_MAX_K_FRACTION: f64 = 0.1;

/// Per-point sorted neighbor indices and distances, self excluded.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    ids: Vec<u32>,
    dists: Vec<f64>,
    n: usize,
    k: usize,
}

impl NeighborTable {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Maximum neighbor order materialized.
    pub fn depth(&self) -> usize {
        self.k
    }

    /// Neighbor indices of point `i`, ascending by (distance, index).
    pub fn ids_row(&self, i: usize) -> &[u32] {
        &self.ids[i * self.k..(i + 1) * self.k]
    }

    /// Distances matching [`Self::ids_row`]; non-decreasing.
    pub fn dists_row(&self, i: usize) -> &[f64] {
        &self.dists[i * self.k..(i + 1) * self.k]
    }
}

#[inline]
fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Build the exact k-NN table at depth `k`.
pub fn build_neighbor_table(cloud: &PointCloud, k: usize) -> Result<NeighborTable> {
    let n = cloud.n();
    if k == 0 {
        return Err(Error::InvalidArgument("neighbor depth K must be positive".into()));
    }
    if k > n - 1 {
        return Err(Error::NeighborOrderTooLarge { k, max: n - 1, n });
    }

    let use_tree = cloud.dim() <= KDTREE_MAX_DIM && (k as f64) < KDTREE_MAX_K_FRACTION * n as f64;
    let tree = if use_tree { Some(KdTree::build(cloud)) } else { None };

    let rows: Vec<(Vec<u32>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let found = match &tree {
                Some(t) => t.knn(cloud, cloud.row(i), k, Some(i)),
                None => brute_knn(cloud, cloud.row(i), k, Some(i)),
            };
            let ids = found.iter().map(|&(id, _)| id as u32).collect();
            let dists = found.into_iter().map(|(_, d)| d).collect();
            (ids, dists)
        })
        .collect();

    let mut ids = Vec::with_capacity(n * k);
    let mut dists = Vec::with_capacity(n * k);
    for (row_ids, row_dists) in rows {
        ids.extend_from_slice(&row_ids);
        dists.extend_from_slice(&row_dists);
    }
    Ok(NeighborTable { ids, dists, n, k })
}

/// The k nearest training points to an arbitrary query point, ascending by
/// (distance, index). The query itself is never excluded: a training point
/// coincident with `q` comes back at distance zero.
pub fn query_knn(cloud: &PointCloud, q: ArrayView1<'_, f64>, k: usize) -> Result<Vec<(usize, f64)>> {
    if q.len() != cloud.dim() {
        return Err(Error::DimensionMismatch {
            expected: cloud.dim(),
            actual: q.len(),
        });
    }
    if k == 0 || k > cloud.n() {
        return Err(Error::NeighborOrderTooLarge {
            k,
            max: cloud.n(),
            n: cloud.n(),
        });
    }
    Ok(brute_knn(cloud, q, k, None))
}

fn brute_knn(
    cloud: &PointCloud,
    q: ArrayView1<'_, f64>,
    k: usize,
    exclude: Option<usize>,
) -> Vec<(usize, f64)> {
    let mut cand: Vec<(f64, usize)> = (0..cloud.n())
        .filter(|&j| Some(j) != exclude)
        .map(|j| (sq_dist(q, cloud.row(j)), j))
        .collect();
    let kth = k.min(cand.len());
    cand.select_nth_unstable_by(kth - 1, |a, b| {
        a.partial_cmp(b).expect("finite distances")
    });
    cand.truncate(kth);
    cand.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    cand.into_iter().map(|(d, j)| (j, d.sqrt())).collect()
}

/// Median-split kd-tree over point indices; exact queries with (distance,
/// index) tie-breaking identical to the brute-force scan.
struct KdTree {
    nodes: Vec<KdNode>,
    /// Point indices, permuted so each node owns a contiguous slice.
    order: Vec<u32>,
    root: usize,
}

struct KdNode {
    axis: usize,
    split: f64,
    left: usize,
    right: usize,
    /// Leaf payload: range into `order`.
    range: (u32, u32),
}

const LEAF_SIZE: usize = 16;
const NO_CHILD: usize = usize::MAX;

impl KdTree {
    fn build(cloud: &PointCloud) -> Self {
        let mut order: Vec<u32> = (0..cloud.n() as u32).collect();
        let mut nodes = Vec::new();
        let root = Self::build_rec(cloud, &mut order, 0, cloud.n(), &mut nodes);
        KdTree { nodes, order, root }
    }

    fn build_rec(
        cloud: &PointCloud,
        order: &mut [u32],
        lo: usize,
        hi: usize,
        nodes: &mut Vec<KdNode>,
    ) -> usize {
        let span = hi - lo;
        if span <= LEAF_SIZE {
            nodes.push(KdNode {
                axis: 0,
                split: 0.0,
                left: NO_CHILD,
                right: NO_CHILD,
                range: (lo as u32, hi as u32),
            });
            return nodes.len() - 1;
        }
        // Split along the axis of largest extent in this cell.
        let d = cloud.dim();
        let mut best_axis = 0;
        let mut best_spread = -1.0;
        for axis in 0..d {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for &idx in &order[lo..hi] {
                let v = cloud.coords()[(idx as usize, axis)];
                min = min.min(v);
                max = max.max(v);
            }
            if max - min > best_spread {
                best_spread = max - min;
                best_axis = axis;
            }
        }
        let mid = lo + span / 2;
        order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            let va = cloud.coords()[(a as usize, best_axis)];
            let vb = cloud.coords()[(b as usize, best_axis)];
            va.partial_cmp(&vb).expect("finite coordinates")
        });
        let split = cloud.coords()[(order[mid] as usize, best_axis)];
        let slot = nodes.len();
        nodes.push(KdNode {
            axis: best_axis,
            split,
            left: NO_CHILD,
            right: NO_CHILD,
            range: (0, 0),
        });
        let left = Self::build_rec(cloud, order, lo, mid, nodes);
        let right = Self::build_rec(cloud, order, mid, hi, nodes);
        nodes[slot].left = left;
        nodes[slot].right = right;
        slot
    }

    fn knn(
        &self,
        cloud: &PointCloud,
        q: ArrayView1<'_, f64>,
        k: usize,
        exclude: Option<usize>,
    ) -> Vec<(usize, f64)> {
        // Max-heap ordered by (distance, index); the root is the current worst.
        let mut heap: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
        self.search(self.root, cloud, q, k, exclude, &mut heap);
        heap.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        heap.into_iter().map(|(d, j)| (j as usize, d.sqrt())).collect()
    }

    fn search(
        &self,
        node_idx: usize,
        cloud: &PointCloud,
        q: ArrayView1<'_, f64>,
        k: usize,
        exclude: Option<usize>,
        heap: &mut Vec<(f64, u32)>,
    ) {
        let node = &self.nodes[node_idx];
        if node.left == NO_CHILD {
            for &idx in &self.order[node.range.0 as usize..node.range.1 as usize] {
                if Some(idx as usize) == exclude {
                    continue;
                }
                let d = sq_dist(q, cloud.row(idx as usize));
                push_candidate(heap, k, (d, idx));
            }
            return;
        }
        let diff = q[node.axis] - node.split;
        let (near, far) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.search(near, cloud, q, k, exclude, heap);
        // Visit the far side unless it provably cannot improve on the current
        // worst candidate. Equal plane distance may still hold a smaller
        // index, so only a strict inequality prunes.
        let plane_sq = diff * diff;
        if heap.len() < k || plane_sq <= heap[0].0 {
            self.search(far, cloud, q, k, exclude, heap);
        }
    }
}

fn push_candidate(heap: &mut Vec<(f64, u32)>, k: usize, cand: (f64, u32)) {
    if heap.len() < k {
        heap.push(cand);
        let last = heap.len() - 1;
        sift_up(heap, last);
    } else if cand < heap[0] {
        heap[0] = cand;
        sift_down(heap, 0);
    }
}

fn sift_up(heap: &mut [(f64, u32)], mut i: usize) {
    while i > 0 {
        let parent = (i - 1) / 2;
        if heap[i] > heap[parent] {
            heap.swap(i, parent);
            i = parent;
        } else {
            break;
        }
    }
}

fn sift_down(heap: &mut [(f64, u32)], mut i: usize) {
    let len = heap.len();
    loop {
        let (l, r) = (2 * i + 1, 2 * i + 2);
        let mut largest = i;
        if l < len && heap[l] > heap[largest] {
            largest = l;
        }
        if r < len && heap[r] > heap[largest] {
            largest = r;
        }
        if largest == i {
            break;
        }
        heap.swap(i, largest);
        i = largest;
    }
}
