//! Synthetic benchmark tasks and PMLB-style dataset files.
//!
//! Every generator is a pure function of `(task, difficulty, seed)`, so
//! regenerating a dataset yields byte-identical files. Difficulty levels of
//! one task share their input and noise draws.

mod io;
mod noise;
mod tasks;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;

pub use io::{read_dataset, sidecar_path, write_dataset, DatasetMeta};
pub use noise::{add_noise, noise_scale, sample_std};
pub use tasks::{
    exact_function, extrapolation_function, feature_selection_function, gen_exact, gen_extrapolation,
    gen_feature_selection, gen_local_optima, gen_noise_task, generate, local_optima_function, meta_feature,
    noise_task_function, DEFAULT_SAMPLES,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("noise ratio {0} outside [0, 1)")]
    InvalidRatio(f64),
    #[error("noise needs at least two target values")]
    TooFewSamples,
    #[error("difficulty {difficulty:?} is not defined for task {task:?}")]
    Inadmissible { task: Task, difficulty: Difficulty },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error in {path}: {message}")]
    Schema { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[serde(alias = "exact")]
    ExactRediscovery,
    FeatureSelection,
    LocalOptima,
    Extrapolation,
    #[serde(alias = "noise")]
    NoiseSensitivity,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::ExactRediscovery,
        Task::FeatureSelection,
        Task::LocalOptima,
        Task::Extrapolation,
        Task::NoiseSensitivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::ExactRediscovery => "exact",
            Task::FeatureSelection => "feature_selection",
            Task::LocalOptima => "local_optima",
            Task::Extrapolation => "extrapolation",
            Task::NoiseSensitivity => "noise",
        }
    }

    pub fn from_name(name: &str) -> Option<Task> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == name || format!("{t:?}").eq_ignore_ascii_case(&name.replace('_', "")))
    }

    pub fn difficulties(self) -> &'static [Difficulty] {
        match self {
            Task::ExactRediscovery => &[
                Difficulty::Easier,
                Difficulty::Easy,
                Difficulty::Medium,
                Difficulty::Hard,
            ],
            _ => &[Difficulty::Easy, Difficulty::Medium, Difficulty::Hard],
        }
    }

    pub fn admits(self, difficulty: Difficulty) -> bool {
        self.difficulties().contains(&difficulty)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easier,
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easier => "easier",
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }

    pub fn from_name(name: &str) -> Option<Difficulty> {
        [
            Difficulty::Easier,
            Difficulty::Easy,
            Difficulty::Medium,
            Difficulty::Hard,
        ]
        .into_iter()
        .find(|d| d.name().eq_ignore_ascii_case(name))
    }
}

/// Recipe for one synthetic dataset pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: Task,
    pub difficulty: Difficulty,
    pub noise_ratio: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Sampling interval per input variable for the training split.
    pub domain: Vec<(f64, f64)>,
    pub seed: u64,
}

impl TaskSpec {
    /// Default recipe for a task/difficulty pair.
    pub fn new(task: Task, difficulty: Difficulty, seed: u64) -> Result<Self, DataError> {
        tasks::default_spec(task, difficulty, seed)
    }

    pub fn id(&self) -> String {
        format!("{}_{}_{}", self.task.name(), self.difficulty.name(), self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Feature matrix, target and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// Row-major `n x d` feature matrix.
    pub features: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    pub feature_names: Vec<String>,
    pub ground_truth: Option<Expr>,
    /// 0-based column indices the generating function uses.
    pub relevant_vars: Vec<usize>,
    /// 0-based column indices unrelated to (or only noisily related to) it.
    pub irrelevant_vars: Vec<usize>,
    pub spec: Option<TaskSpec>,
    pub split: Option<Split>,
}

impl Dataset {
    /// Plain dataset without generator metadata.
    pub fn new(name: impl Into<String>, features: Vec<Vec<f64>>, target: Vec<f64>) -> Self {
        let d = features.first().map_or(0, Vec::len);
        Dataset {
            name: name.into(),
            feature_names: (1..=d).map(|i| format!("x{i}")).collect(),
            features,
            target,
            ground_truth: None,
            relevant_vars: vec![],
            irrelevant_vars: vec![],
            spec: None,
            split: None,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Column-major copy of the features.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_features())
            .map(|j| self.features.iter().map(|r| r[j]).collect())
            .collect()
    }

    /// Rows selected by `indices`, metadata preserved.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Dataset {
        Dataset {
            name: name.into(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            target: indices.iter().map(|&i| self.target[i]).collect(),
            ..self.clone()
        }
    }

    /// Per-feature `(min, max)` over the rows.
    pub fn feature_ranges(&self) -> Vec<(f64, f64)> {
        (0..self.n_features())
            .map(|j| {
                self.features
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                        (lo.min(r[j]), hi.max(r[j]))
                    })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_names_round_trip() {
        for t in Task::ALL {
            assert_eq!(Task::from_name(t.name()), Some(t));
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(serde_json::from_str::<Task>(&json).unwrap(), t);
        }
        assert_eq!(Task::from_name("exact_rediscovery"), Some(Task::ExactRediscovery));
        assert_eq!(
            serde_json::from_str::<Task>("\"noise\"").unwrap(),
            Task::NoiseSensitivity
        );
        assert_eq!(Task::from_name("nope"), None);
    }
}
