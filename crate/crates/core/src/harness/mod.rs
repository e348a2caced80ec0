//! Track orchestration: configs, budgets, runs, reports.

mod budget;
mod config;
mod run;
mod tracks;

use std::path::Path;

use thiserror::Error;

use crate::datagen::DataError;
use crate::realworld::RealWorldError;
use crate::scoring::{records_csv, ScoreError};

pub use budget::{enforce_budget, BudgetError, Timed, GRACE_FRACTION};
pub use config::{AlgorithmSpec, DatasetSource, NamedAlgorithm, TrackConfig, TrackKind};
pub use run::{
    concat, dataset_key, fit_algorithm, run_budgeted, run_seed, score_run, split_train_test, RunOutcome,
    EXACT_TOLERANCE, TRAIN_FRACTION,
};
pub use tracks::{
    model_id, realworld_candidates, run_qualification, run_realworld, run_synthetic, score_realworld, Candidate,
    CandidateSet, QualificationReport, RealworldReport, SeriesScores, SyntheticReport, ASSUMPTIONS,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    RealWorld(#[from] RealWorldError),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 for configuration errors, 3 for missing records or ratings, 1
    /// otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Score(ScoreError::MissingRecords(_)) => 3,
            HarnessError::RealWorld(RealWorldError::MissingTrust(_)) => 3,
            _ => 1,
        }
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), HarnessError> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

/// `report.json`, `records.csv`, `summary.md` and `cd.csv`.
pub fn write_synthetic(dir: &Path, report: &SyntheticReport) -> Result<(), HarnessError> {
    ensure_dir(dir)?;
    write(dir, "report.json", &report.to_json())?;
    write(dir, "records.csv", &records_csv(&report.records))?;
    write(dir, "summary.md", &report.to_markdown())?;
    write(dir, "cd.csv", &report.overall.cd_csv())
}

/// `report.json`, `records.csv` and `summary.md`.
pub fn write_qualification(dir: &Path, report: &QualificationReport) -> Result<(), HarnessError> {
    ensure_dir(dir)?;
    write(dir, "report.json", &report.to_json())?;
    write(dir, "records.csv", &records_csv(&report.records))?;
    write(dir, "summary.md", &report.to_markdown())
}

/// `candidates.csv` and one `predictions/<model_id>.csv` per model.
pub fn write_candidates(dir: &Path, set: &CandidateSet) -> Result<(), HarnessError> {
    let pred_dir = dir.join("predictions");
    ensure_dir(&pred_dir)?;
    write(dir, "candidates.csv", &set.to_csv())?;
    for (id, text) in &set.predictions {
        write(&pred_dir, &format!("{id}.csv"), text)?;
    }
    Ok(())
}

/// `report.json` and `summary.md`.
pub fn write_realworld(dir: &Path, report: &RealworldReport) -> Result<(), HarnessError> {
    ensure_dir(dir)?;
    write(dir, "report.json", &report.to_json())?;
    write(dir, "summary.md", &report.to_markdown())
}
