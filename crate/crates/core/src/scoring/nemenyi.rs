use serde::{Deserialize, Serialize};

use super::ScoreError;

// Critical values q_alpha for k = 2..=20 groups: the upper-alpha quantile of
// the studentized range with infinite degrees of freedom, divided by sqrt(2).
// Generated once with scipy.stats.studentized_range.ppf(1 - alpha, k, inf)
// and rounded to three decimals.
const Q_05: [f64; 19] = [
    1.960, 2.344, 2.569, 2.728, 2.850, 2.948, 3.031, 3.102, 3.164, 3.219, 3.268, 3.313, 3.354, 3.391, 3.426, 3.458,
    3.489, 3.517, 3.544,
];
const Q_10: [f64; 19] = [
    1.645, 2.052, 2.291, 2.460, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978, 3.030, 3.077, 3.120, 3.159, 3.196, 3.230,
    3.261, 3.291, 3.319,
];

pub const MAX_GROUPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Alpha {
    #[default]
    #[serde(rename = "0.05")]
    P05,
    #[serde(rename = "0.10")]
    P10,
}

impl Alpha {
    pub fn value(self) -> f64 {
        match self {
            Alpha::P05 => 0.05,
            Alpha::P10 => 0.10,
        }
    }

    pub fn from_value(a: f64) -> Option<Alpha> {
        if (a - 0.05).abs() < 1e-12 {
            Some(Alpha::P05)
        } else if (a - 0.10).abs() < 1e-12 {
            Some(Alpha::P10)
        } else {
            None
        }
    }
}

/// Tabled Nemenyi critical value for `k` groups.
pub fn nemenyi_q(k: usize, alpha: Alpha) -> Result<f64, ScoreError> {
    if !(2..=MAX_GROUPS).contains(&k) {
        return Err(ScoreError::UnsupportedK(k));
    }
    let table = match alpha {
        Alpha::P05 => &Q_05,
        Alpha::P10 => &Q_10,
    };
    Ok(table[k - 2])
}

/// `q * sqrt(k (k + 1) / (6 n))`.
pub fn critical_difference(k: usize, n: usize, alpha: Alpha) -> Result<f64, ScoreError> {
    if n < 1 {
        return Err(ScoreError::TooFewDatasets(n));
    }
    Ok(nemenyi_q(k, alpha)? * ((k * (k + 1)) as f64 / (6.0 * n as f64)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanNemenyi {
    pub k: usize,
    pub n: usize,
    pub alpha: Alpha,
    /// Mean rank of every column.
    pub mean_ranks: Vec<f64>,
    /// Friedman chi-square statistic.
    pub statistic: f64,
    pub critical_difference: f64,
}

/// Friedman statistic and Nemenyi critical difference for a
/// datasets x algorithms rank matrix.
pub fn friedman_nemenyi(ranks: &[Vec<f64>], alpha: Alpha) -> Result<FriedmanNemenyi, ScoreError> {
    let n = ranks.len();
    if n < 2 {
        return Err(ScoreError::TooFewDatasets(n));
    }
    let k = ranks[0].len();
    if ranks.iter().any(|r| r.len() != k) {
        return Err(ScoreError::LengthMismatch);
    }
    if k < 2 {
        return Err(ScoreError::UnsupportedK(k));
    }
    let mean_ranks: Vec<f64> = (0..k)
        .map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let kf = k as f64;
    let sum_sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let statistic = 12.0 * n as f64 / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0);
    Ok(FriedmanNemenyi {
        k,
        n,
        alpha,
        mean_ranks,
        statistic: statistic.max(0.0),
        critical_difference: critical_difference(k, n, alpha)?,
    })
}
