use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::datagen::{Difficulty, Task};
use crate::engine::{GpConfig, SelectionPolicy};
use crate::scoring::AggregateOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackKind {
    Qualification,
    Synthetic,
    Realworld,
}

impl TrackKind {
    pub fn default_budget(self) -> f64 {
        match self {
            TrackKind::Qualification => 120.0,
            TrackKind::Synthetic | TrackKind::Realworld => 60.0,
        }
    }
}

/// An entrant and its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    Gp {
        #[serde(default)]
        config: GpConfig,
        #[serde(default)]
        selection: SelectionPolicy,
    },
    /// Ordinary least squares on the raw features.
    Linear,
    /// A fixed value, or the training mean when absent.
    Constant {
        #[serde(default)]
        value: Option<f64>,
    },
    /// Returns the dataset's generating expression.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedAlgorithm {
    pub name: String,
    #[serde(flatten)]
    pub spec: AlgorithmSpec,
}

impl NamedAlgorithm {
    pub fn new(name: impl Into<String>, spec: AlgorithmSpec) -> Self {
        NamedAlgorithm {
            name: name.into(),
            spec,
        }
    }
}

/// A dataset file in PMLB format, or a generator recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    File(PathBuf),
    Generated {
        task: Task,
        difficulty: Difficulty,
        seed: u64,
    },
}

fn default_runs() -> usize {
    10
}

fn default_workers() -> usize {
    1
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_alpha() -> f64 {
    crate::realworld::DEFAULT_ALPHA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackConfig {
    pub track: TrackKind,
    pub algorithms: Vec<NamedAlgorithm>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Seconds per run; the track default when absent.
    #[serde(default)]
    pub budget_seconds: Option<f64>,
    /// Explicit datasets. The synthetic track generates every task and
    /// difficulty for each of `seeds` when empty.
    #[serde(default)]
    pub datasets: Vec<DatasetSource>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Restricts generated synthetic datasets to these tasks.
    #[serde(default)]
    pub tasks: Option<Vec<Task>>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub aggregate: AggregateOptions,
    /// Daily series CSV for the real-world track.
    #[serde(default)]
    pub frame: Option<PathBuf>,
    /// Trust ratings CSV for the real-world track.
    #[serde(default)]
    pub ratings: Option<PathBuf>,
    #[serde(default = "default_alpha")]
    pub ewma_alpha: f64,
}

impl TrackConfig {
    pub fn new(track: TrackKind, algorithms: Vec<NamedAlgorithm>) -> Self {
        TrackConfig {
            track,
            algorithms,
            runs: default_runs(),
            budget_seconds: None,
            datasets: vec![],
            seeds: default_seeds(),
            tasks: None,
            output_dir: None,
            workers: default_workers(),
            aggregate: AggregateOptions::default(),
            frame: None,
            ratings: None,
            ewma_alpha: default_alpha(),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let cfg: TrackConfig = serde_json::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn budget(&self) -> f64 {
        self.budget_seconds.unwrap_or_else(|| self.track.default_budget())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        let b = self.budget();
        if !(b > 0.0 && b.is_finite()) {
            return bad(format!("budget must be positive, got {b}"));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms configured".into());
        }
        let mut names = BTreeSet::new();
        for a in &self.algorithms {
            if !names.insert(a.name.as_str()) {
                return bad(format!("duplicate algorithm name {}", a.name));
            }
            if let AlgorithmSpec::Gp { config, .. } = &a.spec {
                config
                    .validate()
                    .map_err(|e| HarnessError::Config(format!("{}: {e}", a.name)))?;
            }
        }
        if self.track == TrackKind::Synthetic && self.datasets.is_empty() && self.seeds.is_empty() {
            return bad("synthetic track needs datasets or seeds".into());
        }
        if self.track == TrackKind::Qualification && self.datasets.is_empty() {
            return bad("qualification track needs datasets".into());
        }
        if self.track == TrackKind::Realworld && self.frame.is_none() {
            return bad("real-world track needs a frame CSV".into());
        }
        if !(self.ewma_alpha > 0.0 && self.ewma_alpha <= 1.0) {
            return bad(format!("EWMA alpha {} outside (0, 1]", self.ewma_alpha));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_defaults() {
        let cfg: TrackConfig = serde_json::from_str(
            r#"{"track": "synthetic", "algorithms": [
                {"name": "gp", "kind": "gp", "config": {"population": 64}},
                {"name": "ols", "kind": "linear"},
                {"name": "zero", "kind": "constant", "value": 0.0}
            ], "datasets": ["a.tsv", {"task": "exact_rediscovery", "difficulty": "easier", "seed": 2}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.runs, 10);
        assert_eq!(cfg.budget(), 60.0);
        assert!(matches!(&cfg.algorithms[0].spec, AlgorithmSpec::Gp { config, .. } if config.population == 64));
        assert_eq!(cfg.datasets[0], DatasetSource::File("a.tsv".into()));
        assert!(matches!(cfg.datasets[1], DatasetSource::Generated { seed: 2, .. }));
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_configs_refused() {
        let base = TrackConfig::new(
            TrackKind::Synthetic,
            vec![NamedAlgorithm::new("ols", AlgorithmSpec::Linear)],
        );
        let mut c = base.clone();
        c.budget_seconds = Some(0.0);
        assert!(matches!(c.validate(), Err(HarnessError::Config(_))));
        let mut c = base.clone();
        c.runs = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.algorithms.push(NamedAlgorithm::new("ols", AlgorithmSpec::Oracle));
        assert!(c.validate().is_err());
        let mut c = base;
        c.track = TrackKind::Qualification;
        assert!(c.validate().is_err());
    }
}
