//! Unpenalized multinomial logistic regression by full-batch gradient
//! descent with backtracking line search, plus accuracy and macro-F1.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LogisticModel {
    /// (d + 1) x C, intercept in the last row.
    pub weights: Array2<f64>,
    pub converged: bool,
    /// Set when the optimizer ran out of iterations while the loss kept
    /// falling toward zero, the signature of separable classes (the
    /// unpenalized likelihood has no maximizer there).
    pub separation_warning: bool,
    pub n_classes: usize,
}

fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

fn augment(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut aug = Array2::ones((n, d + 1));
    aug.slice_mut(ndarray::s![.., ..d]).assign(&x);
    aug
}

/// Negative log-likelihood and gradient at `w`.
fn nll_grad(aug: &Array2<f64>, y: &[usize], w: &Array2<f64>) -> (f64, Array2<f64>) {
    let n = aug.nrows();
    let mut probs = aug.dot(w);
    softmax_rows(&mut probs);
    let mut nll = 0.0;
    for (i, &label) in y.iter().enumerate() {
        nll -= probs[(i, label)].max(1e-300).ln();
    }
    // grad = X^T (P - Y) / n ... kept unscaled by n for a tol in nat units.
    let mut resid = probs;
    for (i, &label) in y.iter().enumerate() {
        resid[(i, label)] -= 1.0;
    }
    let grad = aug.t().dot(&resid) / n as f64;
    (nll / n as f64, grad)
}

/// Fit by gradient descent with Armijo backtracking; converged when the
/// gradient sup-norm falls below `tol`.
pub fn logistic_fit(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    max_iter: usize,
    tol: f64,
) -> Result<LogisticModel> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    let n_classes = y.iter().copied().max().map_or(0, |m| m + 1);
    if n_classes < 2 {
        return Err(Error::InvalidArgument(
            "need at least two classes to fit a classifier".into(),
        ));
    }
    let aug = augment(x);
    let d1 = aug.ncols();
    let mut w = Array2::zeros((d1, n_classes));

    let (mut loss, mut grad) = nll_grad(&aug, y, &w);
    let mut converged = false;
    let mut step = 1.0f64;
    for _ in 0..max_iter {
        let gnorm = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
        if gnorm < tol {
            converged = true;
            break;
        }
        let gsq: f64 = grad.iter().map(|g| g * g).sum();
        // Backtracking from a step that grows again after successes.
        step = (step * 2.0).min(1e4);
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &w - &(&grad * step);
            let (cand_loss, cand_grad) = nll_grad(&aug, y, &cand);
            if cand_loss <= loss - 1e-4 * step * gsq {
                w = cand;
                loss = cand_loss;
                grad = cand_grad;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Numerically flat; treat the current point as the optimum.
            converged = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs())) < tol;
            break;
        }
    }
    let separation_warning = !converged && loss < 1e-3;
    if separation_warning {
        log::warn!(
            "logistic fit stopped at max_iter with near-zero loss; classes look separable"
        );
    }
    Ok(LogisticModel {
        weights: w,
        converged,
        separation_warning,
        n_classes,
    })
}

/// Argmax of the linear scores.
pub fn classify(model: &LogisticModel, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    if x.ncols() + 1 != model.weights.nrows() {
        return Err(Error::DimensionMismatch {
            expected: model.weights.nrows() - 1,
            actual: x.ncols(),
        });
    }
    let scores = augment(x).dot(&model.weights);
    Ok(scores
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap_or(0)
        })
        .collect())
}

pub fn accuracy(truth: &[usize], pred: &[usize]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    let hits = truth.iter().zip(pred).filter(|&(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Unweighted mean of per-class F1 over the classes present in either
/// labeling; a class with no true and no predicted members scores 0.
pub fn f1_macro(truth: &[usize], pred: &[usize]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    let mut classes: Vec<usize> = truth.iter().chain(pred.iter()).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    let mut total = 0.0;
    for &c in &classes {
        let tp = truth
            .iter()
            .zip(pred)
            .filter(|&(&t, &p)| t == c && p == c)
            .count() as f64;
        let fp = truth
            .iter()
            .zip(pred)
            .filter(|&(&t, &p)| t != c && p == c)
            .count() as f64;
        let fneg = truth
            .iter()
            .zip(pred)
            .filter(|&(&t, &p)| t == c && p != c)
            .count() as f64;
        let denom = 2.0 * tp + fp + fneg;
        total += if denom == 0.0 { 0.0 } else { 2.0 * tp / denom };
    }
    Ok(total / classes.len() as f64)
}
