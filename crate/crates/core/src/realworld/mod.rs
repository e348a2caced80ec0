//! COVID-19 forecasting track: ingestion, cleaning, smoothing, lag features,
//! alternating chunk splits and trust-score aggregation.
//!
//! The pipeline order is fixed: [`clean_outliers`], then [`ewma`], then
//! [`extract_features`], then [`chunk_split`].

mod features;
mod trust;

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use features::{chunk_split, extract_features, FeatureTable, FEATURES_PER_SERIES};
pub use trust::{mean_trust, read_ratings, realworld_score, RealWorldEntry, RealWorldScore, TrustRating};

pub const OUTLIER_WINDOW: usize = 7;
pub const OUTLIER_K: f64 = 4.0;
/// `2 / (span + 1)` for a one-week span.
pub const DEFAULT_ALPHA: f64 = 0.25;

#[derive(Debug, Error)]
pub enum RealWorldError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("dates are not contiguous at row {0}")]
    NonContiguous(usize),
    #[error("series of length {got} is too short (need {needed})")]
    TooShort { needed: usize, got: usize },
    #[error("EWMA alpha {0} outside (0, 1]")]
    InvalidAlpha(f64),
    #[error("rating {0} outside 1..=5")]
    InvalidRating(i64),
    #[error("no trust rating for {}", .0.join(", "))]
    MissingTrust(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Series {
    Cases,
    Hospitalizations,
    Deaths,
}

impl Series {
    pub const ALL: [Series; 3] = [Series::Cases, Series::Hospitalizations, Series::Deaths];

    pub fn name(self) -> &'static str {
        match self {
            Series::Cases => "cases",
            Series::Hospitalizations => "hospitalizations",
            Series::Deaths => "deaths",
        }
    }

    pub fn from_name(name: &str) -> Option<Series> {
        Series::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Daily counts for one location over contiguous calendar days.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    pub dates: Vec<NaiveDate>,
    pub cases: Vec<f64>,
    pub hospitalizations: Vec<f64>,
    pub deaths: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct FrameRow {
    date: NaiveDate,
    cases: f64,
    hospitalizations: f64,
    deaths: f64,
}

impl SeriesFrame {
    pub fn new(
        dates: Vec<NaiveDate>,
        cases: Vec<f64>,
        hospitalizations: Vec<f64>,
        deaths: Vec<f64>,
    ) -> Result<Self, RealWorldError> {
        let n = dates.len();
        if cases.len() != n || hospitalizations.len() != n || deaths.len() != n {
            return Err(RealWorldError::Schema("series lengths differ".into()));
        }
        if let Some(i) = (1..n).find(|&i| dates[i - 1].succ_opt() != Some(dates[i])) {
            return Err(RealWorldError::NonContiguous(i));
        }
        let negative = [&cases, &hospitalizations, &deaths]
            .iter()
            .any(|s| s.iter().any(|v| !(*v >= 0.0) || !v.is_finite()));
        if negative {
            return Err(RealWorldError::Schema("counts must be finite and non-negative".into()));
        }
        Ok(SeriesFrame {
            dates,
            cases,
            hospitalizations,
            deaths,
        })
    }

    /// Frame of `n` days starting at `start` built from per-series closures.
    pub fn from_fn(start: NaiveDate, n: usize, f: impl Fn(Series, usize) -> f64) -> Result<Self, RealWorldError> {
        let dates: Vec<NaiveDate> = start.iter_days().take(n).collect();
        let col = |s| (0..n).map(|i| f(s, i)).collect();
        SeriesFrame::new(
            dates,
            col(Series::Cases),
            col(Series::Hospitalizations),
            col(Series::Deaths),
        )
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn series(&self, s: Series) -> &[f64] {
        match s {
            Series::Cases => &self.cases,
            Series::Hospitalizations => &self.hospitalizations,
            Series::Deaths => &self.deaths,
        }
    }

    pub fn map_series(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> SeriesFrame {
        SeriesFrame {
            dates: self.dates.clone(),
            cases: f(&self.cases),
            hospitalizations: f(&self.hospitalizations),
            deaths: f(&self.deaths),
        }
    }

    /// Reads `date,cases,hospitalizations,deaths` with ISO-8601 dates.
    pub fn read_csv(path: &Path) -> Result<Self, RealWorldError> {
        let file = std::fs::File::open(path).map_err(|source| RealWorldError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self, RealWorldError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows: Vec<FrameRow> = Vec::new();
        for r in rdr.deserialize() {
            rows.push(r.map_err(|e| RealWorldError::Schema(e.to_string()))?);
        }
        SeriesFrame::new(
            rows.iter().map(|r| r.date).collect(),
            rows.iter().map(|r| r.cases).collect(),
            rows.iter().map(|r| r.hospitalizations).collect(),
            rows.iter().map(|r| r.deaths).collect(),
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,cases,hospitalizations,deaths\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{:?},{:?},{:?}\n",
                self.dates[i], self.cases[i], self.hospitalizations[i], self.deaths[i]
            ));
        }
        out
    }
}

fn mean_std(w: &[f64]) -> (f64, f64) {
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

fn median(w: &[f64]) -> f64 {
    let mut s = w.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Replaces outliers with the median of their trailing window.
///
/// A point is an outlier when it lies more than `k` sample standard
/// deviations from the mean of the `window` preceding (already cleaned)
/// values. The first `window` points are never modified.
pub fn clean_outliers(series: &[f64], window: usize, k: f64) -> Vec<f64> {
    let mut out = series.to_vec();
    if window == 0 {
        return out;
    }
    for t in window..out.len() {
        let w = &out[t - window..t];
        let (mean, std) = mean_std(w);
        if (out[t] - mean).abs() > k * std {
            out[t] = median(w);
        }
    }
    out
}

/// `s_0 = x_0`, `s_t = alpha x_t + (1 - alpha) s_{t-1}`.
pub fn ewma(series: &[f64], alpha: f64) -> Result<Vec<f64>, RealWorldError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(RealWorldError::InvalidAlpha(alpha));
    }
    let mut out = Vec::with_capacity(series.len());
    for (i, &x) in series.iter().enumerate() {
        let s = if i == 0 {
            x
        } else {
            alpha * x + (1.0 - alpha) * out[i - 1]
        };
        out.push(s);
    }
    Ok(out)
}

/// Cleans and smooths every series, then builds one feature table per
/// target series.
pub fn prepare(frame: &SeriesFrame, alpha: f64) -> Result<Vec<(Series, FeatureTable)>, RealWorldError> {
    let cleaned = frame.map_series(|s| clean_outliers(s, OUTLIER_WINDOW, OUTLIER_K));
    let mut smoothing_error = None;
    let smoothed = cleaned.map_series(|s| {
        ewma(s, alpha).unwrap_or_else(|e| {
            smoothing_error = Some(e);
            vec![]
        })
    });
    if let Some(e) = smoothing_error {
        return Err(e);
    }
    Series::ALL
        .into_iter()
        .map(|s| Ok((s, extract_features(&smoothed, s)?)))
        .collect()
}

/// `date,truth,prediction` rows for plotting a model against the series.
pub fn prediction_csv(dates: &[NaiveDate], truth: &[f64], prediction: &[f64]) -> String {
    let mut out = String::from("date,truth,prediction\n");
    for ((d, t), p) in dates.iter().zip(truth).zip(prediction) {
        out.push_str(&format!("{d},{t:?},{p:?}\n"));
    }
    out
}
