use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::budget::{enforce_budget, BudgetError};
use super::config::AlgorithmSpec;
use crate::datagen::{Dataset, Task};
use crate::engine::{fit_gp, fit_linear, model_r2, select_model, SelectionPolicy};
use crate::expr::{print_infix, Expr};
use crate::scoring::{simplicity_score, task_score, ScoreRecord};
use crate::symbolic::equivalent_up_to_constant;

/// Relative tolerance for exact-rediscovery verdicts.
pub const EXACT_TOLERANCE: f64 = 1e-6;
pub const TRAIN_FRACTION: f64 = 0.75;

/// Seed of run `run` on a dataset generated (or listed) with `base`.
pub fn run_seed(base: u64, run: usize) -> u64 {
    base.wrapping_mul(1000).wrapping_add(run as u64)
}

/// Shuffled 75/25 split keyed to `seed`.
pub fn split_train_test(ds: &Dataset, seed: u64) -> (Dataset, Dataset) {
    let mut idx: Vec<usize> = (0..ds.n_rows()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((ds.n_rows() as f64) * TRAIN_FRACTION).round() as usize;
    let (tr, te) = idx.split_at(cut);
    (
        ds.subset(tr, format!("{}_train", ds.name)),
        ds.subset(te, format!("{}_test", ds.name)),
    )
}

/// Rows of `train` followed by rows of `test`, metadata from `train`.
pub fn concat(train: &Dataset, test: &Dataset, name: impl Into<String>) -> Dataset {
    let mut all = train.clone();
    all.name = name.into();
    all.features.extend(test.features.iter().cloned());
    all.target.extend(test.target.iter().cloned());
    all.split = None;
    all
}

/// Fits one entrant. `selection_data` is handed to test-based selection
/// policies.
pub fn fit_algorithm(
    spec: &AlgorithmSpec,
    train: &Dataset,
    selection_data: Option<&Dataset>,
    seed: u64,
    budget_seconds: f64,
) -> Result<Expr, String> {
    match spec {
        AlgorithmSpec::Gp { config, selection } => {
            let mut cfg = config.clone();
            cfg.seed = seed;
            let out = fit_gp(train, &cfg, budget_seconds).map_err(|e| e.to_string())?;
            let data = match selection {
                SelectionPolicy::BestTestR2 => selection_data,
                _ => None,
            };
            let m = select_model(&out.front, *selection, data).map_err(|e| e.to_string())?;
            Ok(m.expr.clone())
        }
        AlgorithmSpec::Linear => fit_linear(train).map(|f| f.expr).map_err(|e| e.to_string()),
        AlgorithmSpec::Constant { value } => {
            let v = value.unwrap_or_else(|| train.target.iter().sum::<f64>() / train.n_rows().max(1) as f64);
            Ok(Expr::constant(v))
        }
        AlgorithmSpec::Oracle => train
            .ground_truth
            .clone()
            .ok_or_else(|| "dataset has no ground truth".into()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub model: Option<Expr>,
    pub failure: Option<String>,
    pub wall_seconds: f64,
}

/// [`fit_algorithm`] under [`enforce_budget`]. Never fails: errors,
/// overruns and panics become a failure message.
pub fn run_budgeted(
    spec: &AlgorithmSpec,
    train: Arc<Dataset>,
    selection_data: Option<Arc<Dataset>>,
    seed: u64,
    budget_seconds: f64,
) -> RunOutcome {
    let spec = spec.clone();
    let job = move || fit_algorithm(&spec, &train, selection_data.as_deref(), seed, budget_seconds);
    match enforce_budget(job, budget_seconds) {
        Ok(t) => match t.value {
            Ok(model) => RunOutcome {
                model: Some(model),
                failure: None,
                wall_seconds: t.wall_seconds,
            },
            Err(msg) => RunOutcome {
                model: None,
                failure: Some(msg),
                wall_seconds: t.wall_seconds,
            },
        },
        Err(e) => RunOutcome {
            model: None,
            failure: Some(e.to_string()),
            wall_seconds: match e {
                BudgetError::BudgetExceeded { elapsed, .. } => elapsed,
                _ => 0.0,
            },
        },
    }
}

/// Scores a finished run on `test`. Failed runs get `R² = -inf` and no
/// task score.
pub fn score_run(algorithm: &str, run: usize, outcome: &RunOutcome, test: &Dataset) -> ScoreRecord {
    let task = test.spec.as_ref().map(|s| s.task);
    let mut rec = ScoreRecord {
        algorithm: algorithm.to_string(),
        dataset: dataset_key(test),
        task,
        run,
        r2_test: f64::NEG_INFINITY,
        simplicity: f64::NEG_INFINITY,
        task_score: None,
        exact: None,
        model: outcome.model.as_ref().map(print_infix),
        failure: outcome.failure.clone(),
        wall_seconds: Some(outcome.wall_seconds),
    };
    let Some(model) = &outcome.model else {
        return rec;
    };
    rec.r2_test = model_r2(model, test);
    rec.simplicity = simplicity_score(model);
    if let Some(task) = task {
        let verdict = match (task, &test.ground_truth) {
            (Task::ExactRediscovery, Some(truth)) => {
                let domain = test
                    .spec
                    .as_ref()
                    .map(|s| s.domain.clone())
                    .unwrap_or_else(|| test.feature_ranges());
                equivalent_up_to_constant(truth, model, &domain, EXACT_TOLERANCE).ok()
            }
            _ => None,
        };
        rec.task_score = task_score(
            task,
            model,
            &test.relevant_vars,
            &test.irrelevant_vars,
            rec.r2_test,
            verdict.as_ref(),
        );
        rec.exact = verdict;
    }
    rec
}

/// Dataset name with a trailing split suffix removed.
pub fn dataset_key(ds: &Dataset) -> String {
    ["_train", "_test"]
        .iter()
        .find_map(|s| ds.name.strip_suffix(s))
        .unwrap_or(&ds.name)
        .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_exact, Difficulty};

    #[test]
    fn split_is_keyed_and_partitions() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let ds = Dataset::new("d", rows, (0..100).map(f64::from).collect());
        let (a, b) = split_train_test(&ds, 5);
        assert_eq!((a.n_rows(), b.n_rows()), (75, 25));
        assert_eq!(split_train_test(&ds, 5), (a.clone(), b.clone()));
        assert_ne!(split_train_test(&ds, 6).0, a);
        let mut all: Vec<f64> = a.target.iter().chain(&b.target).cloned().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, ds.target);
    }

    #[test]
    fn oracle_scores_perfectly() {
        let (train, test) = gen_exact(Difficulty::Easier, 0).unwrap();
        let out = run_budgeted(&AlgorithmSpec::Oracle, Arc::new(train), None, 0, 5.0);
        let rec = score_run("oracle", 0, &out, &test);
        assert!((rec.r2_test - 1.0).abs() < 1e-9);
        assert_eq!(rec.task_score, Some(1.0));
        assert!(rec.exact.unwrap().is_exact());
    }

    #[test]
    fn failure_scores_worst() {
        let (train, test) = gen_exact(Difficulty::Easier, 0).unwrap();
        let mut train = train;
        train.ground_truth = None;
        let out = run_budgeted(&AlgorithmSpec::Oracle, Arc::new(train), None, 0, 5.0);
        let rec = score_run("oracle", 0, &out, &test);
        assert_eq!(rec.r2_test, f64::NEG_INFINITY);
        assert!(rec.failure.is_some());
        assert_eq!(rec.task_score, None);
    }

    #[test]
    fn constant_defaults_to_mean() {
        let ds = Dataset::new("d", vec![vec![0.0], vec![1.0]], vec![2.0, 4.0]);
        let e = fit_algorithm(&AlgorithmSpec::Constant { value: None }, &ds, None, 0, 1.0).unwrap();
        assert_eq!(e, Expr::constant(3.0));
    }
}
