//! External clustering agreement: adjusted Rand index and the
//! entropy-based homogeneity / completeness / V-measure triple.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// True-class x predicted-cluster count table.
#[derive(Debug, Clone)]
pub struct Contingency {
    counts: Vec<Vec<usize>>,
    row_sums: Vec<usize>,
    col_sums: Vec<usize>,
    n: usize,
}

impl Contingency {
    pub fn from_labels(truth: &[usize], pred: &[usize]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                actual: pred.len(),
            });
        }
        if truth.len() < 2 {
            return Err(Error::InsufficientData(
                "need at least 2 labeled points".into(),
            ));
        }
        let mut row_ids: HashMap<usize, usize> = HashMap::new();
        let mut col_ids: HashMap<usize, usize> = HashMap::new();
        for &t in truth {
            let next = row_ids.len();
            row_ids.entry(t).or_insert(next);
        }
        for &p in pred {
            let next = col_ids.len();
            col_ids.entry(p).or_insert(next);
        }
        let (r, c) = (row_ids.len(), col_ids.len());
        let mut counts = vec![vec![0usize; c]; r];
        for (&t, &p) in truth.iter().zip(pred.iter()) {
            counts[row_ids[&t]][col_ids[&p]] += 1;
        }
        let row_sums: Vec<usize> = counts.iter().map(|row| row.iter().sum()).collect();
        let col_sums: Vec<usize> = (0..c).map(|j| counts.iter().map(|row| row[j]).sum()).collect();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            n: truth.len(),
        })
    }

    pub fn total(&self) -> usize {
        self.n
    }
}

/// The four agreement scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterEval {
    pub ari: f64,
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
}

fn comb2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Pair-counting agreement corrected for chance; 1 is perfect, 0 the
/// permutation-model expectation.
pub fn adjusted_rand_index(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let table = Contingency::from_labels(truth, pred)?;
    let sum_cells: f64 = table
        .counts
        .iter()
        .flat_map(|row| row.iter())
        .map(|&c| comb2(c))
        .sum();
    let sum_rows: f64 = table.row_sums.iter().map(|&c| comb2(c)).sum();
    let sum_cols: f64 = table.col_sums.iter().map(|&c| comb2(c)).sum();
    let pairs = comb2(table.n);
    let expected = sum_rows * sum_cols / pairs;
    let max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index - expected).abs() < 1e-300 {
        // Both partitions trivial (all singletons or one block): define as 1.
        return Ok(1.0);
    }
    Ok((sum_cells - expected) / (max_index - expected))
}

/// Homogeneity, completeness, and their harmonic mean, from conditional
/// entropies in nats.
pub fn homogeneity_completeness_v(truth: &[usize], pred: &[usize]) -> Result<(f64, f64, f64)> {
    let table = Contingency::from_labels(truth, pred)?;
    let n = table.n as f64;

    let entropy = |sums: &[usize]| -> f64 {
        sums.iter()
            .filter(|&&s| s > 0)
            .map(|&s| {
                let p = s as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let h_truth = entropy(&table.row_sums);
    let h_pred = entropy(&table.col_sums);

    // H(truth | pred) and H(pred | truth).
    let mut h_truth_given_pred = 0.0;
    let mut h_pred_given_truth = 0.0;
    for (r, row) in table.counts.iter().enumerate() {
        for (c, &cell) in row.iter().enumerate() {
            if cell == 0 {
                continue;
            }
            let joint = cell as f64 / n;
            h_truth_given_pred -= joint * (cell as f64 / table.col_sums[c] as f64).ln();
            h_pred_given_truth -= joint * (cell as f64 / table.row_sums[r] as f64).ln();
        }
    }

    let homogeneity = if h_truth == 0.0 {
        1.0
    } else {
        1.0 - h_truth_given_pred / h_truth
    };
    let completeness = if h_pred == 0.0 {
        1.0
    } else {
        1.0 - h_pred_given_truth / h_pred
    };
    let v_measure = if homogeneity + completeness == 0.0 {
        0.0
    } else {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    };
    Ok((homogeneity, completeness, v_measure))
}

/// All four scores in one pass.
pub fn cluster_eval(truth: &[usize], pred: &[usize]) -> Result<ClusterEval> {
    let ari = adjusted_rand_index(truth, pred)?;
    let (homogeneity, completeness, v_measure) = homogeneity_completeness_v(truth, pred)?;
    Ok(ClusterEval {
        ari,
        homogeneity,
        completeness,
        v_measure,
    })
}
