//! Python bindings: expressions, generators, baselines, scoring and the
//! real-world preprocessing steps.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use srcomp::datagen::{self, Difficulty, Task, TaskSpec};
use srcomp::engine::{self, GpConfig, SelectionPolicy};
use srcomp::expr::{self, evaluate_batch, print_infix};
use srcomp::scoring::{self, Alpha};
use srcomp::{realworld, special, symbolic};

fn value_error(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Parsed expression tree.
#[pyclass(name = "Expr", module = "pysrcomp", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyExpr {
    inner: expr::Expr,
}

#[pymethods]
impl PyExpr {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        parse_expr(text)
    }

    fn __str__(&self) -> String {
        print_infix(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Expr('{}')", print_infix(&self.inner))
    }

    fn __eq__(&self, other: &PyExpr) -> bool {
        self.inner == other.inner
    }

    /// Values on each row; NaN where the model is undefined.
    fn evaluate(&self, rows: Vec<Vec<f64>>) -> Vec<f64> {
        evaluate_batch(&self.inner, &rows).values
    }

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn variables(&self) -> Vec<usize> {
        self.inner.variables()
    }

    fn simplify(&self) -> PyExpr {
        PyExpr {
            inner: symbolic::simplify(&self.inner),
        }
    }
}

fn parse_expr(text: &str) -> PyResult<PyExpr> {
    expr::parse(text).map(|inner| PyExpr { inner }).map_err(value_error)
}

fn to_expr(text: &str) -> PyResult<expr::Expr> {
    Ok(parse_expr(text)?.inner)
}

/// Feature matrix, target and generator metadata.
#[pyclass(name = "Dataset", module = "pysrcomp", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct PyDataset {
    name: String,
    features: Vec<Vec<f64>>,
    target: Vec<f64>,
    feature_names: Vec<String>,
    ground_truth: Option<String>,
    relevant_vars: Vec<usize>,
    irrelevant_vars: Vec<usize>,
}

#[pymethods]
impl PyDataset {
    fn __len__(&self) -> usize {
        self.target.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset('{}', rows={}, features={})",
            self.name,
            self.target.len(),
            self.feature_names.len()
        )
    }
}

impl From<&datagen::Dataset> for PyDataset {
    fn from(d: &datagen::Dataset) -> Self {
        PyDataset {
            name: d.name.clone(),
            features: d.features.clone(),
            target: d.target.clone(),
            feature_names: d.feature_names.clone(),
            ground_truth: d.ground_truth.as_ref().map(print_infix),
            relevant_vars: d.relevant_vars.clone(),
            irrelevant_vars: d.irrelevant_vars.clone(),
        }
    }
}

#[pyfunction]
fn parse(text: &str) -> PyResult<PyExpr> {
    parse_expr(text)
}

#[pyfunction]
fn simplify(text: &str) -> PyResult<String> {
    Ok(print_infix(&symbolic::simplify(&to_expr(text)?)))
}

/// `(kind, constant)` with kind one of `exact_additive`,
/// `exact_multiplicative`, `not_equivalent`.
#[pyfunction]
#[pyo3(signature = (truth, candidate, domain, tol = 1e-6))]
fn equivalent(truth: &str, candidate: &str, domain: Vec<(f64, f64)>, tol: f64) -> PyResult<(String, Option<f64>)> {
    let v = symbolic::equivalent_up_to_constant(&to_expr(truth)?, &to_expr(candidate)?, &domain, tol)
        .map_err(value_error)?;
    let kind = serde_json::to_value(v.kind).map_err(value_error)?;
    Ok((kind.as_str().unwrap_or_default().to_string(), v.constant))
}

#[pyfunction]
fn erf(x: f64) -> f64 {
    special::erf(x)
}

/// Train and test datasets for a task such as `"exact"` and a difficulty
/// such as `"easier"`.
#[pyfunction]
#[pyo3(signature = (task, difficulty, seed = 0))]
fn generate(task: &str, difficulty: &str, seed: u64) -> PyResult<(PyDataset, PyDataset)> {
    let task = Task::from_name(task).ok_or_else(|| value_error(format!("unknown task {task}")))?;
    let difficulty =
        Difficulty::from_name(difficulty).ok_or_else(|| value_error(format!("unknown difficulty {difficulty}")))?;
    let spec = TaskSpec::new(task, difficulty, seed).map_err(value_error)?;
    let (train, test) = datagen::generate(&spec).map_err(value_error)?;
    Ok(((&train).into(), (&test).into()))
}

fn dataset(features: Vec<Vec<f64>>, target: Vec<f64>) -> PyResult<datagen::Dataset> {
    if features.len() != target.len() || target.is_empty() {
        return Err(value_error("features and target must be nonempty and of equal length"));
    }
    Ok(datagen::Dataset::new("py", features, target))
}

#[pyfunction]
fn fit_linear(features: Vec<Vec<f64>>, target: Vec<f64>) -> PyResult<String> {
    let fit = engine::fit_linear(&dataset(features, target)?).map_err(value_error)?;
    Ok(print_infix(&fit.expr))
}

/// Runs the GP baseline and returns the selected model. `config` is a JSON
/// object with any GP settings to override.
#[pyfunction]
#[pyo3(signature = (features, target, budget_seconds = 10.0, seed = 0, config = None))]
fn fit_gp(
    py: Python<'_>,
    features: Vec<Vec<f64>>,
    target: Vec<f64>,
    budget_seconds: f64,
    seed: u64,
    config: Option<&str>,
) -> PyResult<String> {
    let ds = dataset(features, target)?;
    let mut cfg: GpConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(value_error)?,
        None => GpConfig::default(),
    };
    cfg.seed = seed;
    let expr = py.detach(move || -> Result<expr::Expr, String> {
        let out = engine::fit_gp(&ds, &cfg, budget_seconds).map_err(|e| e.to_string())?;
        let m = engine::select_model(&out.front, SelectionPolicy::default(), None).map_err(|e| e.to_string())?;
        Ok(m.expr.clone())
    });
    expr.map(|e| print_infix(&e)).map_err(value_error)
}

#[pyfunction]
fn r2(y: Vec<f64>, yhat: Vec<f64>) -> PyResult<f64> {
    scoring::r2(&y, &yhat).map_err(value_error)
}

#[pyfunction]
fn simplicity(model: &str) -> PyResult<f64> {
    Ok(scoring::simplicity_score(&to_expr(model)?))
}

#[pyfunction]
fn simplicity_from_nodes(nodes: usize) -> f64 {
    scoring::simplicity_from_nodes(nodes)
}

#[pyfunction]
fn feature_select_score(model: &str, relevant: Vec<usize>, irrelevant: Vec<usize>) -> PyResult<f64> {
    Ok(scoring::feature_select_score(&to_expr(model)?, &relevant, &irrelevant))
}

#[pyfunction]
fn harmonic_rank(ranks: Vec<f64>) -> PyResult<f64> {
    scoring::harmonic_rank(&ranks).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (values, higher_better = true))]
fn rank_criterion(values: Vec<f64>, higher_better: bool) -> Vec<f64> {
    scoring::rank_criterion(&values, higher_better)
}

#[pyfunction]
#[pyo3(signature = (k, n, alpha = 0.05))]
fn critical_difference(k: usize, n: usize, alpha: f64) -> PyResult<f64> {
    let a = Alpha::from_value(alpha).ok_or_else(|| value_error("alpha must be 0.05 or 0.10"))?;
    scoring::critical_difference(k, n, a).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (series, window = realworld::OUTLIER_WINDOW, k = realworld::OUTLIER_K))]
fn clean_outliers(series: Vec<f64>, window: usize, k: f64) -> Vec<f64> {
    realworld::clean_outliers(&series, window, k)
}

#[pyfunction]
#[pyo3(signature = (series, alpha = realworld::DEFAULT_ALPHA))]
fn ewma(series: Vec<f64>, alpha: f64) -> PyResult<Vec<f64>> {
    realworld::ewma(&series, alpha).map_err(value_error)
}

/// `(train_rows, test_rows)` for alternating week blocks.
#[pyfunction]
#[pyo3(signature = (n_rows, train_weeks = 5, test_weeks = 3))]
fn chunk_split(n_rows: usize, train_weeks: usize, test_weeks: usize) -> (Vec<usize>, Vec<usize>) {
    realworld::chunk_split(n_rows, train_weeks, test_weeks)
}

#[pymodule]
fn pysrcomp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpr>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(simplify, m)?)?;
    m.add_function(wrap_pyfunction!(equivalent, m)?)?;
    m.add_function(wrap_pyfunction!(erf, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_linear, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gp, m)?)?;
    m.add_function(wrap_pyfunction!(r2, m)?)?;
    m.add_function(wrap_pyfunction!(simplicity, m)?)?;
    m.add_function(wrap_pyfunction!(simplicity_from_nodes, m)?)?;
    m.add_function(wrap_pyfunction!(feature_select_score, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_rank, m)?)?;
    m.add_function(wrap_pyfunction!(rank_criterion, m)?)?;
    m.add_function(wrap_pyfunction!(critical_difference, m)?)?;
    m.add_function(wrap_pyfunction!(clean_outliers, m)?)?;
    m.add_function(wrap_pyfunction!(ewma, m)?)?;
    m.add_function(wrap_pyfunction!(chunk_split, m)?)?;
    Ok(())
}
