use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{add_noise, DataError, Dataset, Difficulty, Split, Task, TaskSpec};
use crate::expr::{evaluate, Expr};

pub const DEFAULT_SAMPLES: usize = 1000;

const STANDARD_DOMAIN: (f64, f64) = (-3.0, 3.0);
const EXTRAPOLATION_TRAIN: (f64, f64) = (-15.0, 15.0);
const EXTRAPOLATION_TEST: (f64, f64) = (15.0, 40.0);
const NOISE_TASK_DOMAIN: (f64, f64) = (-10.0, 10.0);
/// `log(30 x^2)` is singular at 0; samples closer than this are redrawn.
const LOG_GUARD: f64 = 0.05;
const META_FEATURE_NOISE: f64 = 0.1;

// RNG streams within one (seed, task) family.
const STREAM_TRAIN_X: u64 = 0;
const STREAM_TEST_X: u64 = 1;
const STREAM_TARGET_NOISE: u64 = 2;
const STREAM_META_TRAIN: u64 = 3;
const STREAM_META_TEST: u64 = 4;

fn x(i: usize) -> Expr {
    Expr::var(i)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream keyed by (seed, task). Difficulty is deliberately not part of the
/// key: difficulty levels of one task share inputs and noise draws and differ
/// only in the generating function or noise scale.
fn stream(seed: u64, task: Task, stream: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(task as u64 + 1));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream);
    rng
}

/// Generating functions of the exact-rediscovery task (variables 0-based).
pub fn exact_function(difficulty: Difficulty) -> Expr {
    let f1 = 0.4 * x(0) * x(1) - 1.5 * x(0) + 2.5 * x(1) + 1.0;
    let damping = || 0.2 * (x(0).powi(2) + x(1).powi(2)) + 1.0;
    match difficulty {
        Difficulty::Easier => f1,
        Difficulty::Easy => f1 + (30.0 * x(2).powi(2)).log(),
        Difficulty::Medium => f1 / damping(),
        Difficulty::Hard => (f1 + 5.5 * (x(0) + x(1)).sin()) / damping(),
    }
}

/// Twenty-input function that only uses the even 0-based columns.
pub fn feature_selection_function() -> Expr {
    0.11 * x(0).powi(3)
        + 0.91 * x(2) * x(4)
        + 0.68 * x(6) * x(8)
        + 0.26 * x(10).powi(2) * x(12)
        + 0.16 * x(14) * x(16) * x(18)
}

/// Meta-feature `g_i`, `i` in 1..=5.
pub fn meta_feature(i: usize) -> Expr {
    match i {
        1 => 0.77 * x(0) * x(1),
        2 => 1.52 * x(1) * x(2),
        3 => 1.2 * x(3).powi(2),
        4 => 0.31 * x(0) * x(3) * x(4),
        5 => 0.23 * x(2) * x(3) * x(4),
        _ => panic!("meta-feature index {i} outside 1..=5"),
    }
}

/// Sum of the first `n` meta-features.
pub fn local_optima_function(n: usize) -> Expr {
    (2..=n).fold(meta_feature(1), |acc, i| acc + meta_feature(i))
}

pub fn extrapolation_function() -> Expr {
    (0.22 * x(0)).erf() + 0.17 * (5.5 * x(0)).sin()
}

pub fn noise_task_function() -> Expr {
    (0.11 * x(0).powi(4) - 1.4 * x(0).powi(3)) / (0.68 * x(0).powi(2) + 1.0)
}

fn noise_ratio(task: Task, difficulty: Difficulty) -> f64 {
    use Difficulty::*;
    match (task, difficulty) {
        (Task::FeatureSelection, Easy) => 0.025,
        (Task::FeatureSelection, Medium) => 0.05,
        (Task::FeatureSelection, Hard) => 0.1,
        (Task::Extrapolation, Easy) => 0.05,
        (Task::Extrapolation, Medium) => 0.1,
        (Task::Extrapolation, Hard) => 0.2,
        (Task::NoiseSensitivity, Easy) => 0.05,
        (Task::NoiseSensitivity, Medium) => 0.1,
        (Task::NoiseSensitivity, Hard) => 0.15,
        _ => 0.0,
    }
}

fn local_optima_n(difficulty: Difficulty) -> usize {
    match difficulty {
        Difficulty::Easy => 3,
        Difficulty::Medium => 4,
        _ => 5,
    }
}

pub(super) fn default_spec(task: Task, difficulty: Difficulty, seed: u64) -> Result<TaskSpec, DataError> {
    if !task.admits(difficulty) {
        return Err(DataError::Inadmissible { task, difficulty });
    }
    let dims = match task {
        Task::ExactRediscovery if difficulty == Difficulty::Easy => 3,
        Task::ExactRediscovery => 2,
        Task::FeatureSelection => 20,
        Task::LocalOptima => 5,
        Task::Extrapolation | Task::NoiseSensitivity => 1,
    };
    let interval = match task {
        Task::Extrapolation => EXTRAPOLATION_TRAIN,
        Task::NoiseSensitivity => NOISE_TASK_DOMAIN,
        _ => STANDARD_DOMAIN,
    };
    Ok(TaskSpec {
        task,
        difficulty,
        noise_ratio: noise_ratio(task, difficulty),
        n_train: DEFAULT_SAMPLES,
        n_test: DEFAULT_SAMPLES,
        domain: vec![interval; dims],
        seed,
    })
}

fn sample_rows<R: Rng>(rng: &mut R, n: usize, domain: &[(f64, f64)], guard_log: Option<usize>) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            domain
                .iter()
                .enumerate()
                .map(|(j, &(lo, hi))| loop {
                    let v = lo + (hi - lo) * rng.random::<f64>();
                    if guard_log != Some(j) || v.abs() >= LOG_GUARD {
                        break v;
                    }
                })
                .collect()
        })
        .collect()
}

/// Rows on the half-open interval `(lo, hi]`.
fn sample_rows_open_left<R: Rng>(rng: &mut R, n: usize, (lo, hi): (f64, f64)) -> Vec<Vec<f64>> {
    (0..n).map(|_| vec![hi - (hi - lo) * rng.random::<f64>()]).collect()
}

fn eval_target(truth: &Expr, rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter()
        .map(|r| evaluate(truth, r).expect("generating functions are defined on their domains"))
        .collect()
}

struct Parts {
    feature_names: Vec<String>,
    truth: Expr,
    relevant: Vec<usize>,
    irrelevant: Vec<usize>,
}

fn assemble(spec: &TaskSpec, parts: &Parts, split: Split, features: Vec<Vec<f64>>, target: Vec<f64>) -> Dataset {
    let tag = match split {
        Split::Train => "train",
        Split::Test => "test",
    };
    Dataset {
        name: format!("{}_{tag}", spec.id()),
        features,
        target,
        feature_names: parts.feature_names.clone(),
        ground_truth: Some(parts.truth.clone()),
        relevant_vars: parts.relevant.clone(),
        irrelevant_vars: parts.irrelevant.clone(),
        spec: Some(spec.clone()),
        split: Some(split),
    }
}

fn names(n: usize, prefix: &str) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Generates the train/test pair described by `spec`.
pub fn generate(spec: &TaskSpec) -> Result<(Dataset, Dataset), DataError> {
    if !spec.task.admits(spec.difficulty) {
        return Err(DataError::Inadmissible {
            task: spec.task,
            difficulty: spec.difficulty,
        });
    }
    if !(0.0..1.0).contains(&spec.noise_ratio) {
        return Err(DataError::InvalidRatio(spec.noise_ratio));
    }
    let mut train_rng = stream(spec.seed, spec.task, STREAM_TRAIN_X);
    let mut test_rng = stream(spec.seed, spec.task, STREAM_TEST_X);
    let mut noise_rng = stream(spec.seed, spec.task, STREAM_TARGET_NOISE);

    match spec.task {
        Task::ExactRediscovery => {
            let truth = exact_function(spec.difficulty);
            let d = spec.domain.len();
            let guard = (spec.difficulty == Difficulty::Easy).then_some(2);
            let parts = Parts {
                feature_names: names(d, "x"),
                relevant: truth.variables(),
                irrelevant: (0..d).filter(|j| !truth.variables().contains(j)).collect(),
                truth,
            };
            let xtr = sample_rows(&mut train_rng, spec.n_train, &spec.domain, guard);
            let xte = sample_rows(&mut test_rng, spec.n_test, &spec.domain, guard);
            let ytr = eval_target(&parts.truth, &xtr);
            let yte = eval_target(&parts.truth, &xte);
            Ok((
                assemble(spec, &parts, Split::Train, xtr, ytr),
                assemble(spec, &parts, Split::Test, xte, yte),
            ))
        }
        Task::FeatureSelection | Task::NoiseSensitivity => {
            let truth = match spec.task {
                Task::FeatureSelection => feature_selection_function(),
                _ => noise_task_function(),
            };
            let d = spec.domain.len();
            let used = truth.variables();
            let parts = Parts {
                feature_names: names(d, "x"),
                irrelevant: (0..d).filter(|j| !used.contains(j)).collect(),
                relevant: used,
                truth,
            };
            let xtr = sample_rows(&mut train_rng, spec.n_train, &spec.domain, None);
            let xte = sample_rows(&mut test_rng, spec.n_test, &spec.domain, None);
            let ytr = add_noise(&eval_target(&parts.truth, &xtr), spec.noise_ratio, &mut noise_rng)?;
            let yte = eval_target(&parts.truth, &xte);
            Ok((
                assemble(spec, &parts, Split::Train, xtr, ytr),
                assemble(spec, &parts, Split::Test, xte, yte),
            ))
        }
        Task::LocalOptima => {
            let n = local_optima_n(spec.difficulty);
            let truth = local_optima_function(n);
            let used = truth.variables();
            let mut feature_names = names(5, "x");
            feature_names.extend(names(n, "g"));
            let parts = Parts {
                feature_names,
                irrelevant: (0..5).filter(|j| !used.contains(j)).chain(5..5 + n).collect(),
                relevant: used,
                truth,
            };
            let base = &spec.domain[..5.min(spec.domain.len())];
            let mut meta_train = stream(spec.seed, spec.task, STREAM_META_TRAIN);
            let mut meta_test = stream(spec.seed, spec.task, STREAM_META_TEST);
            let build = |rows: Vec<Vec<f64>>, rng: &mut ChaCha8Rng| -> Result<(Vec<Vec<f64>>, Vec<f64>), DataError> {
                let y = eval_target(&parts.truth, &rows);
                let mut rows = rows;
                for i in 1..=n {
                    let g = eval_target(&meta_feature(i), &rows);
                    let noisy = add_noise(&g, META_FEATURE_NOISE, rng)?;
                    for (row, v) in rows.iter_mut().zip(noisy) {
                        row.push(v);
                    }
                }
                Ok((rows, y))
            };
            let (xtr, ytr) = build(sample_rows(&mut train_rng, spec.n_train, base, None), &mut meta_train)?;
            let (xte, yte) = build(sample_rows(&mut test_rng, spec.n_test, base, None), &mut meta_test)?;
            Ok((
                assemble(spec, &parts, Split::Train, xtr, ytr),
                assemble(spec, &parts, Split::Test, xte, yte),
            ))
        }
        Task::Extrapolation => {
            let parts = Parts {
                feature_names: names(1, "x"),
                truth: extrapolation_function(),
                relevant: vec![0],
                irrelevant: vec![],
            };
            let xtr = sample_rows(&mut train_rng, spec.n_train, &spec.domain, None);
            let xte = sample_rows_open_left(&mut test_rng, spec.n_test, EXTRAPOLATION_TEST);
            let ytr = add_noise(&eval_target(&parts.truth, &xtr), spec.noise_ratio, &mut noise_rng)?;
            let yte = eval_target(&parts.truth, &xte);
            Ok((
                assemble(spec, &parts, Split::Train, xtr, ytr),
                assemble(spec, &parts, Split::Test, xte, yte),
            ))
        }
    }
}

fn generate_default(task: Task, difficulty: Difficulty, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    generate(&TaskSpec::new(task, difficulty, seed)?)
}

/// Exact rediscovery: Easier/Easy/Medium/Hard map to f1..f4.
pub fn gen_exact(difficulty: Difficulty, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    generate_default(Task::ExactRediscovery, difficulty, seed)
}

pub fn gen_feature_selection(difficulty: Difficulty, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    generate_default(Task::FeatureSelection, difficulty, seed)
}

pub fn gen_local_optima(difficulty: Difficulty, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    generate_default(Task::LocalOptima, difficulty, seed)
}

pub fn gen_extrapolation(difficulty: Difficulty, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    generate_default(Task::Extrapolation, difficulty, seed)
}

pub fn gen_noise_task(difficulty: Difficulty, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    generate_default(Task::NoiseSensitivity, difficulty, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f1(a: f64, b: f64) -> f64 {
        0.4 * a * b - 1.5 * a + 2.5 * b + 1.0
    }

    #[test]
    fn exact_easier_matches_closed_form() {
        let (train, test) = gen_exact(Difficulty::Easier, 1).unwrap();
        assert_eq!(train.n_rows(), 1000);
        for ds in [&train, &test] {
            for (r, y) in ds.features.iter().zip(&ds.target) {
                assert!((y - f1(r[0], r[1])).abs() < 1e-12);
            }
        }
        assert_eq!(
            evaluate(train.ground_truth.as_ref().unwrap(), &[0.0, 0.0]).unwrap(),
            1.0
        );
    }

    #[test]
    fn exact_easy_adds_log_term() {
        let (train, _) = gen_exact(Difficulty::Easy, 2).unwrap();
        assert_eq!(train.n_features(), 3);
        for (r, y) in train.features.iter().zip(&train.target) {
            assert!(r[2].abs() >= LOG_GUARD);
            let lhs = y - f1(r[0], r[1]);
            assert!((lhs - (30.0 * r[2] * r[2]).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_medium_is_damped_f1() {
        let (train, _) = gen_exact(Difficulty::Medium, 3).unwrap();
        for (r, y) in train.features.iter().zip(&train.target) {
            let lhs = y * (0.2 * (r[0] * r[0] + r[1] * r[1]) + 1.0);
            assert!((lhs - f1(r[0], r[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn feature_selection_values() {
        let f = feature_selection_function();
        assert!((evaluate(&f, &[1.0; 20]).unwrap() - 2.12).abs() < 1e-12);
        assert_eq!(evaluate(&f, &[0.0; 20]).unwrap(), 0.0);
        let (train, test) = gen_feature_selection(Difficulty::Easy, 5).unwrap();
        assert_eq!(train.relevant_vars, vec![0, 2, 4, 6, 8, 10, 12, 14, 16, 18]);
        assert_eq!(train.irrelevant_vars, vec![1, 3, 5, 7, 9, 11, 13, 15, 17, 19]);
        for (r, y) in test.features.iter().zip(&test.target) {
            assert_eq!(*y, evaluate(&f, r).unwrap());
        }
    }

    #[test]
    fn difficulty_changes_only_noise_scale() {
        let (easy, _) = gen_feature_selection(Difficulty::Easy, 11).unwrap();
        let (hard, _) = gen_feature_selection(Difficulty::Hard, 11).unwrap();
        assert_eq!(easy.features, hard.features);
        let f = feature_selection_function();
        let clean: Vec<f64> = easy.features.iter().map(|r| evaluate(&f, r).unwrap()).collect();
        let s_easy = super::super::noise_scale(1.0, 0.025);
        let s_hard = super::super::noise_scale(1.0, 0.1);
        for i in 0..clean.len() {
            let e = (easy.target[i] - clean[i]) / s_easy;
            let h = (hard.target[i] - clean[i]) / s_hard;
            assert!((e - h).abs() < 1e-9 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn local_optima_layout() {
        assert!((evaluate(&local_optima_function(5), &[1.0; 5]).unwrap() - 4.03).abs() < 1e-12);
        let (train, test) = gen_local_optima(Difficulty::Easy, 4).unwrap();
        assert_eq!(
            train.feature_names,
            vec!["x1", "x2", "x3", "x4", "x5", "g1", "g2", "g3"]
        );
        assert!(!train.relevant_vars.contains(&4));
        assert_eq!(train.relevant_vars, vec![0, 1, 2, 3]);
        assert_eq!(train.irrelevant_vars, vec![4, 5, 6, 7]);
        let truth = train.ground_truth.as_ref().unwrap();
        for (r, y) in test.features.iter().zip(&test.target) {
            assert_eq!(*y, evaluate(truth, r).unwrap());
        }
        let (hard, _) = gen_local_optima(Difficulty::Hard, 4).unwrap();
        assert_eq!(hard.n_features(), 10);
        assert_eq!(hard.relevant_vars, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn extrapolation_split() {
        let f = extrapolation_function();
        assert_eq!(evaluate(&f, &[0.0]).unwrap(), 0.0);
        let (train, test) = gen_extrapolation(Difficulty::Medium, 9).unwrap();
        assert!(train.features.iter().all(|r| r[0].abs() <= 15.0));
        assert!(test.features.iter().all(|r| r[0] > 15.0 && r[0] <= 40.0));
    }

    #[test]
    fn noise_task_values() {
        let f = noise_task_function();
        assert_eq!(evaluate(&f, &[0.0]).unwrap(), 0.0);
        assert!((evaluate(&f, &[1.0]).unwrap() + 0.767_857_142_857).abs() < 1e-9);
    }

    #[test]
    fn inadmissible_difficulty() {
        assert!(matches!(
            gen_noise_task(Difficulty::Easier, 0),
            Err(DataError::Inadmissible { .. })
        ));
    }

    #[test]
    fn same_seed_same_data() {
        let a = gen_local_optima(Difficulty::Medium, 21).unwrap();
        let b = gen_local_optima(Difficulty::Medium, 21).unwrap();
        assert_eq!(a, b);
        let c = gen_local_optima(Difficulty::Medium, 22).unwrap();
        assert_ne!(a.0.features, c.0.features);
    }
}
