//! Competition metrics and rank aggregation.
//!
//! Every criterion is oriented so that larger is better, and ranks follow the
//! same convention: among `k` algorithms the best receives rank `k`, the
//! worst rank 1, ties the average of the ranks they span.

pub(crate) mod aggregate;
mod nemenyi;

use thiserror::Error;

use crate::datagen::Task;
use crate::expr::Expr;
use crate::symbolic::{simplify, EquivalenceVerdict};

pub use aggregate::{
    aggregate_track, records_csv, AggregateOptions, AggregationOrder, AlgorithmSummary, DatasetRanks, Hole, RankReport,
    ScoreRecord, CRITERIA,
};
pub use nemenyi::{critical_difference, friedman_nemenyi, nemenyi_q, Alpha, FriedmanNemenyi, MAX_GROUPS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("target has zero variance")]
    DegenerateTarget,
    #[error("inputs are empty or differ in length")]
    LengthMismatch,
    #[error("rank {0} is not positive")]
    NonPositiveRank(f64),
    #[error("critical values are tabled for 2..=20 groups, got {0}")]
    UnsupportedK(usize),
    #[error("need at least two datasets, got {0}")]
    TooFewDatasets(usize),
    #[error("{} missing (algorithm, dataset, run) records", .0.len())]
    MissingRecords(Vec<Hole>),
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64, ScoreError> {
    if y.is_empty() || y.len() != yhat.len() {
        return Err(ScoreError::LengthMismatch);
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(ScoreError::DegenerateTarget);
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// `round(-log5(s), 1)` with halves rounded away from zero.
pub fn simplicity_from_nodes(s: usize) -> f64 {
    let v = -(s.max(1) as f64).ln() / 5f64.ln();
    // adding 0.0 turns -0.0 into 0.0
    (v * 10.0).round() / 10.0 + 0.0
}

/// Simplicity of `expr`, measured on its simplified form.
pub fn simplicity_score(expr: &Expr) -> f64 {
    simplicity_from_nodes(simplify(expr).node_count())
}

/// `(T - B) / F` clamped to `[0, 1]`, where `T` and `F` count the relevant
/// and irrelevant features and `B` the irrelevant ones the simplified model
/// still uses. Without irrelevant features the score is 1.
pub fn feature_select_score(expr: &Expr, relevant: &[usize], irrelevant: &[usize]) -> f64 {
    if irrelevant.is_empty() {
        return 1.0;
    }
    let used = simplify(expr).variables();
    let b = irrelevant.iter().filter(|v| used.contains(v)).count();
    let score = (relevant.len() as f64 - b as f64) / irrelevant.len() as f64;
    score.clamp(0.0, 1.0)
}

/// `n / sum(1 / r_i)`.
pub fn harmonic_rank(ranks: &[f64]) -> Result<f64, ScoreError> {
    if ranks.is_empty() {
        return Err(ScoreError::LengthMismatch);
    }
    if let Some(&r) = ranks.iter().find(|r| !(**r > 0.0)) {
        return Err(ScoreError::NonPositiveRank(r));
    }
    // scaled by the smallest rank so equal ranks come back exactly
    let min = ranks.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(min * ranks.len() as f64 / ranks.iter().map(|r| min / r).sum::<f64>())
}

/// Ranks `values` so that the best gets `k` and the worst 1; ties share the
/// average rank. NaN counts as the worst possible value.
pub fn rank_criterion(values: &[f64], higher_better: bool) -> Vec<f64> {
    let key = |v: f64| {
        let v = if higher_better { v } else { -v };
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| key(values[a]).total_cmp(&key(values[b])));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && key(values[order[j + 1]]) == key(values[order[i]]) {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Task-specific criterion.
///
/// Exact rediscovery scores the equivalence verdict as 1 or 0; feature
/// selection and local optima use [`feature_select_score`]; extrapolation
/// uses R² on the held-out region. The noise task has no extra criterion.
pub fn task_score(
    task: Task,
    expr: &Expr,
    relevant: &[usize],
    irrelevant: &[usize],
    test_r2: f64,
    verdict: Option<&EquivalenceVerdict>,
) -> Option<f64> {
    match task {
        Task::ExactRediscovery => Some(if verdict.is_some_and(EquivalenceVerdict::is_exact) {
            1.0
        } else {
            0.0
        }),
        Task::FeatureSelection | Task::LocalOptima => Some(feature_select_score(expr, relevant, irrelevant)),
        Task::Extrapolation => Some(test_r2),
        Task::NoiseSensitivity => None,
    }
}
