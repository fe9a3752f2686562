//! Stratified m-fold cross-validation over embed-then-classify pipelines.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;

use crate::dataset::PointCloud;
use crate::error::{Error, Result};
use crate::rng::{mix, substream};

use super::{accuracy, f1_macro};

/// One fold's held-out scores.
#[derive(Debug, Clone, Copy)]
pub struct FoldMetrics {
    pub accuracy: f64,
    pub f1_macro: f64,
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub folds: Vec<FoldMetrics>,
    pub mean_accuracy: f64,
    pub mean_f1: f64,
}

/// A procedure that trains on the labeled training cloud and predicts labels
/// for held-out coordinate rows.
pub trait FoldPipeline: Sync {
    fn fit_predict(
        &self,
        train: &PointCloud,
        test: ArrayView2<'_, f64>,
        fold_seed: u64,
    ) -> Result<Vec<usize>>;
}

impl<F> FoldPipeline for F
where
    F: Fn(&PointCloud, ArrayView2<'_, f64>, u64) -> Result<Vec<usize>> + Sync,
{
    fn fit_predict(
        &self,
        train: &PointCloud,
        test: ArrayView2<'_, f64>,
        fold_seed: u64,
    ) -> Result<Vec<usize>> {
        self(train, test, fold_seed)
    }
}

/// Deterministic stratified fold assignment; falls back to unstratified when
/// some class has fewer members than folds.
pub(crate) fn fold_assignment(labels: &[usize], m: usize, seed: u64) -> Vec<usize> {
    let n = labels.len();
    let mut rng = substream(seed, "folds");
    let mut by_class: Vec<Vec<usize>> = Vec::new();
    {
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        for class in classes {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
            by_class.push(members);
        }
    }
    let stratifiable = by_class.iter().all(|members| members.len() >= m);
    let mut fold = vec![0usize; n];
    if stratifiable {
        for members in &mut by_class {
            members.shuffle(&mut rng);
            for (pos, &idx) in members.iter().enumerate() {
                fold[idx] = pos % m;
            }
        }
    } else {
        log::warn!("a class has fewer than {m} members; folds are unstratified");
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for (pos, &idx) in order.iter().enumerate() {
            fold[idx] = pos % m;
        }
    }
    fold
}

/// Deterministic shuffled holdout split: (test indices, train indices).
pub fn holdout_indices(n: usize, frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::InvalidArgument(
            "holdout fraction must lie in (0, 1)".into(),
        ));
    }
    if n < 3 {
        return Err(Error::InsufficientData(
            "holdout split needs at least 3 points".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = substream(seed, "holdout");
    order.shuffle(&mut rng);
    let n_test = ((n as f64 * frac).round() as usize).clamp(1, n - 2);
    let test = order[..n_test].to_vec();
    let train = order[n_test..].to_vec();
    Ok((test, train))
}

/// Run the pipeline once per fold: embed/classify on the training split,
/// score predictions on the held-out split.
pub fn kfold_cv(
    cloud: &PointCloud,
    m: usize,
    pipeline: &dyn FoldPipeline,
    seed: u64,
) -> Result<CvReport> {
    let labels = cloud.labels().ok_or_else(|| {
        Error::InvalidArgument("cross-validation needs a labeled cloud".into())
    })?;
    let n = cloud.n();
    if m < 2 || m > n {
        return Err(Error::InvalidArgument(format!(
            "fold count {m} must lie in [2, n = {n}]"
        )));
    }
    let fold = fold_assignment(labels, m, seed);

    let mut folds = Vec::with_capacity(m);
    for f in 0..m {
        let train_idx: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
        let test_idx: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
        if test_idx.is_empty() {
            continue;
        }
        let train = cloud.select(&train_idx)?;
        let test = cloud.coords().select(ndarray::Axis(0), &test_idx);
        let truth: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();
        let pred = pipeline
            .fit_predict(&train, test.view(), mix(&[seed, f as u64]))
            .map_err(|e| e.at_stage("cross-validation fold"))?;
        folds.push(FoldMetrics {
            accuracy: accuracy(&truth, &pred)?,
            f1_macro: f1_macro(&truth, &pred)?,
        });
    }
    let mean_accuracy = folds.iter().map(|f| f.accuracy).sum::<f64>() / folds.len() as f64;
    let mean_f1 = folds.iter().map(|f| f.f1_macro).sum::<f64>() / folds.len() as f64;
    Ok(CvReport {
        folds,
        mean_accuracy,
        mean_f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use ndarray::Array2;
    use rand::Rng;

    fn labeled_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = substream(seed, "cv-test");
        let coords = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>());
        let labels = (0..n).map(|i| i % 3).collect();
        PointCloud::new(coords, Some(labels)).unwrap()
    }

    /// Majority-vote-on-training pipeline; enough to exercise the folding.
    fn majority(train: &PointCloud, test: ArrayView2<'_, f64>, _seed: u64) -> Result<Vec<usize>> {
        let labels = train.labels().unwrap();
        let mut counts = std::collections::HashMap::new();
        for &l in labels {
            *counts.entry(l).or_insert(0usize) += 1;
        }
        let top = counts.into_iter().max_by_key(|&(_, c)| c).unwrap().0;
        Ok(vec![top; test.nrows()])
    }

    #[test]
    fn folds_partition_exactly() {
        let cloud = labeled_cloud(31, 1);
        let fold = fold_assignment(cloud.labels().unwrap(), 4, 7);
        assert_eq!(fold.len(), 31);
        let mut seen = vec![0usize; 4];
        for &f in &fold {
            assert!(f < 4);
            seen[f] += 1;
        }
        assert_eq!(seen.iter().sum::<usize>(), 31);
        // Stratified: each fold's class counts differ by at most one.
        for class in 0..3 {
            let per_fold: Vec<usize> = (0..4)
                .map(|f| {
                    (0..31)
                        .filter(|&i| fold[i] == f && cloud.labels().unwrap()[i] == class)
                        .count()
                })
                .collect();
            let min = per_fold.iter().min().unwrap();
            let max = per_fold.iter().max().unwrap();
            assert!(max - min <= 1, "class {class}: {per_fold:?}");
        }
    }

    #[test]
    fn leave_one_out_runs() {
        let cloud = labeled_cloud(9, 2);
        let report = kfold_cv(&cloud, 9, &majority, 3).unwrap();
        assert_eq!(report.folds.len(), 9);
    }

    #[test]
    fn fold_assignment_is_seed_deterministic() {
        let cloud = labeled_cloud(50, 3);
        let a = fold_assignment(cloud.labels().unwrap(), 3, 11);
        let b = fold_assignment(cloud.labels().unwrap(), 3, 11);
        let c = fold_assignment(cloud.labels().unwrap(), 3, 12);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn small_class_falls_back_unstratified() {
        let coords = Array2::from_shape_fn((6, 2), |(i, j)| (i * 2 + j) as f64);
        // One member of class 9: cannot stratify into 3 folds.
        let labels = vec![0, 0, 0, 0, 0, 9];
        let cloud = PointCloud::new(coords, Some(labels)).unwrap();
        let fold = fold_assignment(cloud.labels().unwrap(), 3, 5);
        let mut seen: Vec<usize> = fold.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn unlabeled_cloud_rejected() {
        let coords = Array2::zeros((10, 2));
        let cloud = PointCloud::new(coords, None).unwrap();
        assert!(kfold_cv(&cloud, 3, &majority, 1).is_err());
    }
}
