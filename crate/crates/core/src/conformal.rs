//! Split conformal prediction with adaptive prediction sets (APS).
//!
//! The APS score of label `y` for a node is the total predicted probability
//! of every label ranked at or above `y`, ranking by probability descending
//! with ties broken by label id. Calibration takes the
//! `ceil((1 - alpha)(n + 1))`-th smallest calibration score as the
//! threshold; a test label enters the prediction set when its score is at
//! most that threshold.

use crate::autodiff::{softmax_rows, Matrix};
use crate::error::{validation, Result};

const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Row-stochastic matrix of class probabilities, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix(Matrix);

impl ProbMatrix {
    pub fn new(probs: Matrix) -> Result<Self> {
        for r in 0..probs.rows() {
            let row = probs.row(r);
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(validation(format!("row {r} has entries outside [0, 1]")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(validation(format!("row {r} sums to {total}")));
            }
        }
        Ok(Self(probs))
    }

    /// Row-wise softmax of raw logits.
    pub fn from_logits(logits: &Matrix) -> Self {
        Self(softmax_rows(logits))
    }

    pub fn num_rows(&self) -> usize {
        self.0.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        self.0.row(r)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    /// Rows for the given positions, in order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        Ok(Self(self.0.gather_rows(rows)?))
    }
}

/// Labels ordered by probability descending, ties by label id ascending.
pub fn aps_ranking(row: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    order
}

/// APS score of every label of one probability row.
pub fn aps_candidate_scores(row: &[f64]) -> Vec<f64> {
    let mut scores = vec![0.0; row.len()];
    let mut cumulative = 0.0;
    for y in aps_ranking(row) {
        cumulative += row[y];
        scores[y] = cumulative;
    }
    scores
}

/// Non-conformity score of `label` for one probability row.
pub fn aps_score(row: &[f64], label: usize) -> Result<f64> {
    if label >= row.len() {
        return Err(validation(format!(
            "label {label} out of range for {} classes",
            row.len()
        )));
    }
    let mut cumulative = 0.0;
    for y in aps_ranking(row) {
        cumulative += row[y];
        if y == label {
            break;
        }
    }
    Ok(cumulative)
}

/// 1-based order statistic `clamp(ceil((1 - alpha)(n + 1)), 1, n)`.
pub fn calibration_rank(n: usize, alpha: f64) -> usize {
    let j = ((1.0 - alpha) * (n as f64 + 1.0) - 1e-9).ceil();
    (j.max(1.0) as usize).min(n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub threshold: f64,
    pub calib_scores: Vec<f64>,
}

/// Threshold from the calibration nodes' true-label APS scores.
pub fn calibrate(probs: &ProbMatrix, labels: &[usize], alpha: f64) -> Result<CalibrationResult> {
    let n = probs.num_rows();
    if n == 0 {
        return Err(validation("empty calibration set"));
    }
    if labels.len() != n {
        return Err(validation(format!("{} labels for {n} calibration rows", labels.len())));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(validation(format!("miscoverage {alpha} outside (0, 1)")));
    }
    let calib_scores = labels
        .iter()
        .enumerate()
        .map(|(r, &y)| aps_score(probs.row(r), y))
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibrationResult {
        threshold: threshold_from_scores(&calib_scores, alpha),
        calib_scores,
    })
}

/// The calibration order statistic of raw scores (`scores` nonempty).
pub fn threshold_from_scores(scores: &[f64], alpha: f64) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[calibration_rank(sorted.len(), alpha) - 1]
}

/// Sorted set of candidate labels for one node.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PredictionSet(Vec<usize>);

impl PredictionSet {
    pub fn new(mut labels: Vec<usize>) -> Self {
        labels.sort_unstable();
        labels.dedup();
        Self(labels)
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, label: usize) -> bool {
        self.0.binary_search(&label).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Labels whose APS score is at most `threshold`, per row.
pub fn predict_sets(probs: &ProbMatrix, threshold: f64) -> Vec<PredictionSet> {
    (0..probs.num_rows())
        .map(|r| {
            let scores = aps_candidate_scores(probs.row(r));
            PredictionSet(
                (0..scores.len())
                    .filter(|&y| scores[y] <= threshold)
                    .collect(),
            )
        })
        .collect()
}

/// Fraction of nodes whose true label is in their set.
pub fn coverage(sets: &[PredictionSet], labels: &[usize]) -> Result<f64> {
    if sets.len() != labels.len() {
        return Err(validation(format!("{} sets for {} labels", sets.len(), labels.len())));
    }
    if sets.is_empty() {
        return Ok(0.0);
    }
    let hits = sets.iter().zip(labels).filter(|(s, &y)| s.contains(y)).count();
    Ok(hits as f64 / sets.len() as f64)
}

/// Mean set size.
pub fn efficiency(sets: &[PredictionSet]) -> f64 {
    if sets.is_empty() {
        return 0.0;
    }
    sets.iter().map(PredictionSet::len).sum::<usize>() as f64 / sets.len() as f64
}
