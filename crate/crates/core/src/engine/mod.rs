//! Baseline regressors: a tree GP with Levenberg-Marquardt constant tuning
//! and a Pareto archive, plus ordinary least squares.

mod gp;
mod linear;
mod lm;
mod pareto;
mod select;
mod semantics;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::Dataset;
use crate::expr::{evaluate_batch, print_infix, Expr};
use crate::scoring::r2;
use crate::symbolic::simplified_node_count;

pub use gp::{fit_gp, ConstantTuning, GpConfig, GpOutcome, Objective, StopReason, EXACT_FIT};
pub use linear::{affine_expr, fit_linear, LinearFit, RIDGE_LAMBDA};
pub use lm::{finite_difference_jacobian, optimize_constants, optimize_constants_with, sse, LmResult, JACOBIAN_STEP};
pub use pareto::{FrontMember, ParetoFront};
pub use select::{member_r2, select_from, select_model, SelectionPolicy};
pub use semantics::{materialize, DivisionPolicy, Protected};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid GP configuration: {0}")]
    InvalidConfig(String),
    #[error("budget must be positive, got {0} s")]
    InvalidBudget(f64),
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("cannot select from an empty front")]
    EmptyFront,
    #[error("selection policy needs test data")]
    MissingTestData,
    #[error("numerical failure: {0}")]
    Numerical(&'static str),
}

/// R² of `expr` on `ds` under exact semantics; `-inf` when the model is
/// undefined on some row or the target is constant.
pub fn model_r2(expr: &Expr, ds: &Dataset) -> f64 {
    let report = evaluate_batch(expr, &ds.features);
    if report.domain_violations > 0 {
        return f64::NEG_INFINITY;
    }
    r2(&ds.target, &report.values).unwrap_or(f64::NEG_INFINITY)
}

/// One fitted model as emitted by `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub algorithm: String,
    pub dataset: String,
    pub seed: u64,
    pub expression: String,
    #[serde(with = "crate::serde_f64")]
    pub train_r2: f64,
    #[serde(with = "crate::serde_f64")]
    pub test_r2: f64,
    pub nodes_raw: usize,
    pub nodes_simplified: usize,
    pub wall_seconds: f64,
}

impl ModelRecord {
    pub fn new(
        algorithm: impl Into<String>,
        seed: u64,
        expr: &Expr,
        train: &Dataset,
        test: Option<&Dataset>,
        wall_seconds: f64,
    ) -> Self {
        ModelRecord {
            algorithm: algorithm.into(),
            dataset: train.name.clone(),
            seed,
            expression: print_infix(expr),
            train_r2: model_r2(expr, train),
            test_r2: test.map_or(f64::NEG_INFINITY, |t| model_r2(expr, t)),
            nodes_raw: expr.node_count(),
            nodes_simplified: simplified_node_count(expr),
            wall_seconds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn record_round_trips_through_json() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let ds = Dataset::new("d", rows, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        let e = parse("log(x0)").unwrap();
        let rec = ModelRecord::new("gp", 3, &e, &ds, None, 0.5);
        assert_eq!(rec.train_r2, f64::NEG_INFINITY);
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.contains("\"train_r2\":null"));
        let back: ModelRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
    }
}
