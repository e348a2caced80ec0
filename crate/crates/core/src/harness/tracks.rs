use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AlgorithmSpec, DatasetSource, NamedAlgorithm, TrackConfig, TrackKind};
use super::run::{concat, dataset_key, run_budgeted, run_seed, score_run, split_train_test, RunOutcome};
use super::HarnessError;
use crate::datagen::{generate, read_dataset, Dataset, Task, TaskSpec};
use crate::engine::{model_r2, SelectionPolicy};
use crate::expr::{evaluate_batch, print_infix, Expr};
use crate::realworld::{
    chunk_split, mean_trust, prediction_csv, prepare, realworld_score, RealWorldEntry, RealWorldScore, Series,
    SeriesFrame, TrustRating,
};
use crate::scoring::{aggregate::median, aggregate_track, rank_criterion, simplicity_score, RankReport, ScoreRecord};

/// Recorded in every report header.
pub const ASSUMPTIONS: [&str; 3] = [
    "file datasets and qualification datasets use a shuffled 75/25 train/test split keyed to the run seed",
    "run seed = 1000 * dataset seed + run index",
    "failed or over-budget runs score R2 = -inf",
];

fn assumptions() -> Vec<String> {
    ASSUMPTIONS.iter().map(|s| s.to_string()).collect()
}

enum Split {
    Fixed { train: Arc<Dataset>, test: Arc<Dataset> },
    Resplit(Dataset),
}

struct Prepared {
    key: String,
    seed: u64,
    split: Split,
}

impl Prepared {
    fn pair(&self, run: usize) -> (Arc<Dataset>, Arc<Dataset>) {
        match &self.split {
            Split::Fixed { train, test } => (train.clone(), test.clone()),
            Split::Resplit(full) => {
                let (tr, te) = split_train_test(full, run_seed(self.seed, run));
                (Arc::new(tr), Arc::new(te))
            }
        }
    }
}

fn load_sources(sources: &[DatasetSource], resplit_generated: bool) -> Result<Vec<Prepared>, HarnessError> {
    sources
        .iter()
        .map(|src| match src {
            DatasetSource::File(path) => {
                let ds = read_dataset(path)?;
                Ok(Prepared {
                    key: dataset_key(&ds),
                    seed: 0,
                    split: Split::Resplit(ds),
                })
            }
            &DatasetSource::Generated { task, difficulty, seed } => {
                let spec = TaskSpec::new(task, difficulty, seed)?;
                let (train, test) = generate(&spec)?;
                let split = if resplit_generated {
                    Split::Resplit(concat(&train, &test, spec.id()))
                } else {
                    Split::Fixed {
                        train: Arc::new(train),
                        test: Arc::new(test),
                    }
                };
                Ok(Prepared {
                    key: spec.id(),
                    seed,
                    split,
                })
            }
        })
        .collect()
}

fn synthetic_sources(cfg: &TrackConfig) -> Vec<DatasetSource> {
    if !cfg.datasets.is_empty() {
        return cfg.datasets.clone();
    }
    let tasks = cfg.tasks.clone().unwrap_or_else(|| Task::ALL.to_vec());
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        for &task in &tasks {
            for &difficulty in task.difficulties() {
                out.push(DatasetSource::Generated { task, difficulty, seed });
            }
        }
    }
    out
}

/// Maps `f` over `items` on `workers` threads, keeping input order.
fn par_map<I: Sync, T: Send>(items: &[I], workers: usize, f: impl Fn(&I) -> T + Sync + Send) -> Vec<T> {
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

/// Runs every algorithm `runs` times on every dataset and scores the runs.
fn run_grid(cfg: &TrackConfig, algorithms: &[NamedAlgorithm], data: &[Prepared]) -> Vec<ScoreRecord> {
    let jobs: Vec<(usize, usize, usize)> = (0..data.len())
        .flat_map(|d| (0..algorithms.len()).flat_map(move |a| (0..cfg.runs).map(move |r| (d, a, r))))
        .collect();
    let budget = cfg.budget();
    par_map(&jobs, cfg.workers, |&(d, a, r)| {
        let (train, test) = data[d].pair(r);
        let alg = &algorithms[a];
        let outcome = run_budgeted(&alg.spec, train, Some(test.clone()), run_seed(data[d].seed, r), budget);
        let mut rec = score_run(&alg.name, r, &outcome, &test);
        rec.dataset = data[d].key.clone();
        rec
    })
}

fn strip_wall(records: &[ScoreRecord]) -> Vec<ScoreRecord> {
    records
        .iter()
        .map(|r| ScoreRecord {
            wall_seconds: None,
            ..r.clone()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticReport {
    pub track: TrackKind,
    pub assumptions: Vec<String>,
    pub runs: usize,
    pub budget_seconds: f64,
    pub overall: RankReport,
    pub per_task: BTreeMap<Task, RankReport>,
    pub records: Vec<ScoreRecord>,
}

impl SyntheticReport {
    /// Machine report without wall-clock times.
    pub fn to_json(&self) -> String {
        let stripped = SyntheticReport {
            records: strip_wall(&self.records),
            ..self.clone()
        };
        serde_json::to_string_pretty(&stripped).expect("report serializes") + "\n"
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "# Synthetic track\n\n{} runs per dataset, {} s per run.\n\n",
            self.runs, self.budget_seconds
        );
        out.push_str(&self.overall.to_markdown("Overall"));
        for (task, rep) in &self.per_task {
            out.push('\n');
            out.push_str(&rep.to_markdown(task.name()));
        }
        out
    }
}

/// Generates (or loads) the synthetic datasets, runs every entrant and
/// aggregates per task and overall.
pub fn run_synthetic(cfg: &TrackConfig) -> Result<SyntheticReport, HarnessError> {
    cfg.validate()?;
    let data = load_sources(&synthetic_sources(cfg), false)?;
    let records = run_grid(cfg, &cfg.algorithms, &data);
    let overall = aggregate_track(&records, cfg.aggregate)?;
    let mut per_task = BTreeMap::new();
    for task in Task::ALL {
        let subset: Vec<ScoreRecord> = records.iter().filter(|r| r.task == Some(task)).cloned().collect();
        if !subset.is_empty() {
            per_task.insert(task, aggregate_track(&subset, cfg.aggregate)?);
        }
    }
    Ok(SyntheticReport {
        track: TrackKind::Synthetic,
        assumptions: assumptions(),
        runs: cfg.runs,
        budget_seconds: cfg.budget(),
        overall,
        per_task,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualificationReport {
    pub track: TrackKind,
    pub assumptions: Vec<String>,
    pub baseline: String,
    pub algorithms: Vec<String>,
    pub datasets: Vec<String>,
    /// `median_r2[d][a]`; `null` for `-inf`.
    pub median_r2: Vec<Vec<Option<f64>>>,
    /// `ranks[d][a]`, best = number of algorithms.
    pub ranks: Vec<Vec<f64>>,
    /// Median rank per algorithm across datasets.
    pub median_rank: Vec<f64>,
    pub disqualified: Vec<String>,
    pub records: Vec<ScoreRecord>,
}

impl QualificationReport {
    pub fn to_json(&self) -> String {
        let stripped = QualificationReport {
            records: strip_wall(&self.records),
            ..self.clone()
        };
        serde_json::to_string_pretty(&stripped).expect("report serializes") + "\n"
    }

    pub fn median_r2_of(&self, algorithm: &str, dataset: usize) -> Option<f64> {
        let a = self.algorithms.iter().position(|x| x == algorithm)?;
        Some(self.median_r2[dataset][a].unwrap_or(f64::NEG_INFINITY))
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Qualification\n\n| algorithm | median rank | status |\n|---|---:|---|\n");
        for (a, r) in self.algorithms.iter().zip(&self.median_rank) {
            let status = if self.disqualified.contains(a) {
                "disqualified"
            } else if *a == self.baseline {
                "baseline"
            } else {
                "qualified"
            };
            out.push_str(&format!("| {a} | {r:.4} | {status} |\n"));
        }
        out
    }
}

/// Ranks entrants by median test R² per dataset and disqualifies those whose
/// median rank falls below the linear baseline's. A baseline named `linear`
/// is added when no linear entrant is configured.
pub fn run_qualification(cfg: &TrackConfig) -> Result<QualificationReport, HarnessError> {
    cfg.validate()?;
    let mut algorithms = cfg.algorithms.clone();
    let baseline = match algorithms.iter().find(|a| a.spec == AlgorithmSpec::Linear) {
        Some(a) => a.name.clone(),
        None => {
            let name = if algorithms.iter().any(|a| a.name == "linear") {
                "linear-baseline"
            } else {
                "linear"
            };
            algorithms.push(NamedAlgorithm::new(name, AlgorithmSpec::Linear));
            name.to_string()
        }
    };
    let data = load_sources(&cfg.datasets, true)?;
    let records = run_grid(cfg, &algorithms, &data);

    let names: Vec<String> = algorithms.iter().map(|a| a.name.clone()).collect();
    let mut median_r2 = Vec::new();
    let mut ranks = Vec::new();
    for p in &data {
        let medians: Vec<f64> = names
            .iter()
            .map(|n| {
                let mut v: Vec<f64> = records
                    .iter()
                    .filter(|r| r.dataset == p.key && &r.algorithm == n)
                    .map(|r| r.r2_test)
                    .collect();
                median(&mut v)
            })
            .collect();
        ranks.push(rank_criterion(&medians, true));
        median_r2.push(medians.iter().map(|v| v.is_finite().then_some(*v)).collect());
    }
    let median_rank: Vec<f64> = (0..names.len())
        .map(|a| {
            let mut v: Vec<f64> = ranks.iter().map(|r| r[a]).collect();
            median(&mut v)
        })
        .collect();
    let b = names.iter().position(|n| *n == baseline).expect("baseline present");
    let disqualified = names
        .iter()
        .zip(&median_rank)
        .filter(|(_, r)| **r < median_rank[b])
        .map(|(n, _)| n.clone())
        .collect();
    Ok(QualificationReport {
        track: TrackKind::Qualification,
        assumptions: assumptions(),
        baseline,
        algorithms: names,
        datasets: data.iter().map(|p| p.key.clone()).collect(),
        median_r2,
        ranks,
        median_rank,
        disqualified,
        records,
    })
}

/// The best model of one entrant on one target series, awaiting a rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub series: Series,
    pub algorithm: String,
    pub model_id: String,
    pub expression: String,
    #[serde(with = "crate::serde_f64")]
    pub r2_test: f64,
    #[serde(with = "crate::serde_f64")]
    pub simplicity: f64,
}

/// Candidates plus `date,truth,prediction` CSV text per model id.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    pub predictions: BTreeMap<String, String>,
}

impl CandidateSet {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.candidates {
            w.serialize(c).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Vec<Candidate>, HarnessError> {
        csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<Vec<Candidate>, _>>()
            .map_err(|e| HarnessError::Config(format!("candidates: {e}")))
    }
}

pub fn model_id(algorithm: &str, series: Series) -> String {
    format!("{algorithm}-{}", series.name())
}

/// Fits every entrant on every target series and keeps, per entrant, the
/// model with the best test R² over runs (and, for GP, over its front).
pub fn realworld_candidates(cfg: &TrackConfig) -> Result<CandidateSet, HarnessError> {
    cfg.validate()?;
    let path = cfg
        .frame
        .as_ref()
        .ok_or_else(|| HarnessError::Config("real-world track needs a frame CSV".into()))?;
    let frame = SeriesFrame::read_csv(path)?;
    let tables = prepare(&frame, cfg.ewma_alpha)?;
    let mut candidates = Vec::new();
    let mut predictions = BTreeMap::new();
    for (series, table) in &tables {
        let (tr, te) = chunk_split(table.len(), 5, 3);
        let train = Arc::new(table.to_dataset(&tr, format!("{}_train", series.name())));
        let test = Arc::new(table.to_dataset(&te, format!("{}_test", series.name())));
        let jobs: Vec<(usize, usize)> = (0..cfg.algorithms.len())
            .flat_map(|a| (0..cfg.runs).map(move |r| (a, r)))
            .collect();
        let outcomes: Vec<RunOutcome> = par_map(&jobs, cfg.workers, |&(a, r)| {
            let spec = match &cfg.algorithms[a].spec {
                AlgorithmSpec::Gp { config, .. } => AlgorithmSpec::Gp {
                    config: config.clone(),
                    selection: SelectionPolicy::BestTestR2,
                },
                other => other.clone(),
            };
            run_budgeted(&spec, train.clone(), Some(test.clone()), run_seed(0, r), cfg.budget())
        });
        for (a, alg) in cfg.algorithms.iter().enumerate() {
            let mut best: Option<(f64, &Expr)> = None;
            for o in &outcomes[a * cfg.runs..(a + 1) * cfg.runs] {
                if let Some(m) = &o.model {
                    let r2 = model_r2(m, &test);
                    if best.is_none_or(|(b, _)| r2 > b) {
                        best = Some((r2, m));
                    }
                }
            }
            let id = model_id(&alg.name, *series);
            let (r2, expression, simplicity) = match best {
                Some((r2, m)) => {
                    let pred = evaluate_batch(m, &table.rows).values;
                    predictions.insert(id.clone(), prediction_csv(&table.label_dates, &table.labels, &pred));
                    (r2, print_infix(m), simplicity_score(m))
                }
                None => (f64::NEG_INFINITY, String::new(), f64::NEG_INFINITY),
            };
            candidates.push(Candidate {
                series: *series,
                algorithm: alg.name.clone(),
                model_id: id,
                expression,
                r2_test: r2,
                simplicity,
            });
        }
    }
    Ok(CandidateSet {
        candidates,
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesScores {
    pub series: Series,
    pub scores: Vec<RealWorldScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealworldReport {
    pub track: TrackKind,
    pub assumptions: Vec<String>,
    pub series: Vec<SeriesScores>,
    /// Mean final score per algorithm over the target series.
    pub overall: BTreeMap<String, f64>,
    pub winner: String,
}

impl RealworldReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Real-world track\n");
        for s in &self.series {
            out.push_str(&format!(
                "\n## {}\n\n| algorithm | model | R2 rank | simplicity rank | trust rank | score |\n|---|---|---:|---:|---:|---:|\n",
                s.series.name()
            ));
            for r in &s.scores {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {:.4} |\n",
                    r.algorithm, r.model_id, r.ranks[0], r.ranks[1], r.ranks[2], r.score
                ));
            }
        }
        out.push_str(&format!("\nWinner: **{}**.\n", self.winner));
        out
    }
}

/// Joins trust ratings onto the candidates and computes final scores per
/// target series.
pub fn score_realworld(candidates: &[Candidate], ratings: &[TrustRating]) -> Result<RealworldReport, HarnessError> {
    let trust = mean_trust(ratings);
    let mut by_series: BTreeMap<Series, Vec<RealWorldEntry>> = BTreeMap::new();
    for c in candidates {
        by_series.entry(c.series).or_default().push(RealWorldEntry {
            algorithm: c.algorithm.clone(),
            model_id: c.model_id.clone(),
            r2_test: c.r2_test,
            simplicity: c.simplicity,
            trust: trust.get(&c.model_id).copied(),
        });
    }
    let missing: Vec<String> = by_series
        .values()
        .flatten()
        .filter(|e| e.trust.is_none())
        .map(|e| e.model_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(crate::realworld::RealWorldError::MissingTrust(missing).into());
    }
    let mut series = Vec::new();
    let mut totals: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (s, entries) in by_series {
        let scores = realworld_score(&entries)?;
        for sc in &scores {
            let t = totals.entry(sc.algorithm.clone()).or_default();
            t.0 += sc.score;
            t.1 += 1;
        }
        series.push(SeriesScores { series: s, scores });
    }
    let overall: BTreeMap<String, f64> = totals.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    let winner = overall
        .iter()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(k, _)| k.clone())
        .unwrap_or_default();
    Ok(RealworldReport {
        track: TrackKind::Realworld,
        assumptions: assumptions(),
        series,
        overall,
        winner,
    })
}

/// [`realworld_candidates`] followed by [`score_realworld`].
pub fn run_realworld(cfg: &TrackConfig, ratings: &[TrustRating]) -> Result<RealworldReport, HarnessError> {
    let set = realworld_candidates(cfg)?;
    score_realworld(&set.candidates, ratings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Difficulty;

    fn quick(track: TrackKind, algorithms: Vec<NamedAlgorithm>) -> TrackConfig {
        let mut cfg = TrackConfig::new(track, algorithms);
        cfg.runs = 2;
        cfg.budget_seconds = Some(5.0);
        cfg
    }

    #[test]
    fn synthetic_oracle_wins() {
        let mut cfg = quick(
            TrackKind::Synthetic,
            vec![
                NamedAlgorithm::new("oracle", AlgorithmSpec::Oracle),
                NamedAlgorithm::new("linear", AlgorithmSpec::Linear),
                NamedAlgorithm::new("const", AlgorithmSpec::Constant { value: None }),
            ],
        );
        cfg.tasks = Some(vec![Task::ExactRediscovery, Task::Extrapolation]);
        let rep = run_synthetic(&cfg).unwrap();
        assert_eq!(rep.overall.winner, "oracle");
        assert_eq!(rep.records.len(), 3 * 2 * rep.overall.datasets.len());
        assert_eq!(rep.per_task.len(), 2);
        assert!(!rep.to_json().contains("wall_seconds"));
    }

    #[test]
    fn qualification_adds_baseline_and_disqualifies_zero() {
        let mut cfg = quick(
            TrackKind::Qualification,
            vec![NamedAlgorithm::new(
                "zero",
                AlgorithmSpec::Constant { value: Some(0.0) },
            )],
        );
        cfg.datasets = vec![DatasetSource::Generated {
            task: Task::ExactRediscovery,
            difficulty: Difficulty::Easier,
            seed: 0,
        }];
        let rep = run_qualification(&cfg).unwrap();
        assert_eq!(rep.baseline, "linear");
        assert_eq!(rep.disqualified, vec!["zero".to_string()]);
    }

    #[test]
    fn qualification_baseline_alone() {
        let mut cfg = quick(
            TrackKind::Qualification,
            vec![NamedAlgorithm::new("ols", AlgorithmSpec::Linear)],
        );
        cfg.datasets = vec![DatasetSource::Generated {
            task: Task::FeatureSelection,
            difficulty: Difficulty::Easy,
            seed: 0,
        }];
        let rep = run_qualification(&cfg).unwrap();
        assert!(rep.disqualified.is_empty());
        assert_eq!(rep.algorithms, vec!["ols".to_string()]);
    }

    #[test]
    fn realworld_trust_orders_identical_models() {
        let c = |alg: &str| Candidate {
            series: Series::Cases,
            algorithm: alg.into(),
            model_id: model_id(alg, Series::Cases),
            expression: "x1".into(),
            r2_test: 0.8,
            simplicity: 0.0,
        };
        let cands = vec![c("a"), c("b")];
        let ratings = vec![
            TrustRating::new("a-cases", 5, "r", "t").unwrap(),
            TrustRating::new("b-cases", 1, "r", "t").unwrap(),
        ];
        let rep = score_realworld(&cands, &ratings).unwrap();
        assert!(rep.overall["a"] > rep.overall["b"]);
        assert_eq!(rep.winner, "a");
        let err = score_realworld(&cands, &ratings[..1]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let back = CandidateSet::from_csv(
            &CandidateSet {
                candidates: cands.clone(),
                predictions: BTreeMap::new(),
            }
            .to_csv(),
        )
        .unwrap();
        assert_eq!(back, cands);
    }
}
