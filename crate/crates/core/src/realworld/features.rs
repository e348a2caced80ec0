use chrono::NaiveDate;

use super::{RealWorldError, Series, SeriesFrame};
use crate::datagen::Dataset;

pub const FEATURES_PER_SERIES: usize = 5;
const MAX_LAG: usize = 2;

/// Lag features for one target series.
///
/// Row `i` describes day `day[i]` and is labelled with the target on the
/// following day. Every feature depends only on days up to and including
/// `day[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub target: Series,
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    /// Frame index of the last day each row reads.
    pub day: Vec<usize>,
    pub label_dates: Vec<NaiveDate>,
}

impl FeatureTable {
    pub fn feature_names() -> Vec<String> {
        let mut names = Vec::with_capacity(3 * FEATURES_PER_SERIES);
        for s in Series::ALL {
            for suffix in ["lag1", "lag2", "diff1", "diff2", "total"] {
                names.push(format!("{}_{suffix}", s.name()));
            }
        }
        names
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows at `indices` as a PMLB-style dataset.
    pub fn to_dataset(&self, indices: &[usize], name: impl Into<String>) -> Dataset {
        let mut ds = Dataset::new(
            name,
            indices.iter().map(|&i| self.rows[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
        );
        ds.feature_names = self.names.clone();
        ds
    }
}

/// For each day `t` with `2 <= t < n - 1` and each series `x`: `x[t-1]`,
/// `x[t-2]`, `x[t] - x[t-1]`, `x[t] - x[t-2]` and the running total up to
/// `t`. The label is `target[t + 1]`.
pub fn extract_features(frame: &SeriesFrame, target: Series) -> Result<FeatureTable, RealWorldError> {
    let n = frame.len();
    let needed = MAX_LAG + 2;
    if n < needed {
        return Err(RealWorldError::TooShort { needed, got: n });
    }
    let totals: Vec<Vec<f64>> = Series::ALL
        .iter()
        .map(|&s| {
            frame
                .series(s)
                .iter()
                .scan(0.0, |acc, v| {
                    *acc += v;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(n - needed + 1);
    let mut labels = Vec::with_capacity(rows.capacity());
    let mut day = Vec::with_capacity(rows.capacity());
    let mut label_dates = Vec::with_capacity(rows.capacity());
    for t in MAX_LAG..n - 1 {
        let mut row = Vec::with_capacity(3 * FEATURES_PER_SERIES);
        for (k, &s) in Series::ALL.iter().enumerate() {
            let x = frame.series(s);
            row.extend([x[t - 1], x[t - 2], x[t] - x[t - 1], x[t] - x[t - 2], totals[k][t]]);
        }
        rows.push(row);
        labels.push(frame.series(target)[t + 1]);
        day.push(t);
        label_dates.push(frame.dates[t + 1]);
    }
    Ok(FeatureTable {
        target,
        names: FeatureTable::feature_names(),
        rows,
        labels,
        day,
        label_dates,
    })
}

/// Alternating chronological blocks: `train_weeks` weeks of training rows,
/// then `test_weeks` weeks of test rows, repeated.
pub fn chunk_split(n_rows: usize, train_weeks: usize, test_weeks: usize) -> (Vec<usize>, Vec<usize>) {
    let train_len = 7 * train_weeks;
    let cycle = 7 * (train_weeks + test_weeks);
    if cycle == 0 {
        return (vec![], vec![]);
    }
    (0..n_rows).partition(|i| i % cycle < train_len)
}
