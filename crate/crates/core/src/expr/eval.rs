use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BinaryOp, Expr, UnaryOp};
use crate::special::erf;

/// Denominators with a smaller magnitude are treated as division by zero.
pub const DIV_EPSILON: f64 = 1e-12;

/// A partial operator was applied outside its domain, or the result left the
/// finite reals.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("domain violation in `{op}`")]
pub struct DomainViolation {
    pub op: &'static str,
}

/// Result of evaluating an expression on many rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// One value per row; rows with a violation hold NaN.
    pub values: Vec<f64>,
    pub domain_violations: usize,
}

impl EvalReport {
    pub fn is_clean(&self) -> bool {
        self.domain_violations == 0
    }
}

/// Element-wise operator semantics. Returning NaN marks a violation.
pub trait Semantics {
    fn unary(&self, op: UnaryOp, x: f64) -> f64;
    fn binary(&self, op: BinaryOp, a: f64, b: f64) -> f64;
}

/// Exact mathematical semantics; partial operators report violations.
#[derive(Debug, Clone, Copy, Default)]
pub struct Raw;

impl Semantics for Raw {
    #[inline]
    fn unary(&self, op: UnaryOp, x: f64) -> f64 {
        raw_unary(op, x)
    }

    #[inline]
    fn binary(&self, op: BinaryOp, a: f64, b: f64) -> f64 {
        raw_binary(op, a, b)
    }
}

#[inline]
fn finite_or_nan(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::NAN
    }
}

#[inline]
pub(crate) fn raw_unary(op: UnaryOp, x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let v = match op {
        UnaryOp::Neg => -x,
        UnaryOp::Sin => x.sin(),
        UnaryOp::Cos => x.cos(),
        UnaryOp::Tanh => x.tanh(),
        UnaryOp::Exp => x.exp(),
        UnaryOp::Log => {
            if x <= 0.0 {
                return f64::NAN;
            }
            x.ln()
        }
        UnaryOp::Sqrt => {
            if x < 0.0 {
                return f64::NAN;
            }
            x.sqrt()
        }
        UnaryOp::Abs => x.abs(),
        UnaryOp::Erf => erf(x),
    };
    finite_or_nan(v)
}

#[inline]
pub(crate) fn raw_binary(op: BinaryOp, a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        return f64::NAN;
    }
    let v = match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b.abs() < DIV_EPSILON {
                return f64::NAN;
            }
            a / b
        }
        BinaryOp::Pow => raw_pow(a, b),
    };
    finite_or_nan(v)
}

#[inline]
fn raw_pow(a: f64, b: f64) -> f64 {
    if a < 0.0 && b.fract() != 0.0 {
        return f64::NAN;
    }
    if a == 0.0 && b < 0.0 {
        return f64::NAN;
    }
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

fn violation_name(e: &Expr) -> &'static str {
    match e {
        Expr::Unary(op, _) => op.name(),
        Expr::Binary(op, _, _) => op.symbol(),
        _ => "leaf",
    }
}

/// Evaluates `expr` on one input row under exact semantics.
///
/// Panics if the row is shorter than the expression's arity.
pub fn evaluate(expr: &Expr, row: &[f64]) -> Result<f64, DomainViolation> {
    let v = match expr {
        Expr::Const(c) => return Ok(*c),
        Expr::Var(i) => return Ok(row[*i]),
        Expr::Unary(op, c) => raw_unary(*op, evaluate(c, row)?),
        Expr::Binary(op, l, r) => {
            let a = evaluate(l, row)?;
            let b = evaluate(r, row)?;
            raw_binary(*op, a, b)
        }
    };
    if v.is_nan() {
        Err(DomainViolation {
            op: violation_name(expr),
        })
    } else {
        Ok(v)
    }
}

/// Evaluates `expr` on every row of a row-major matrix.
pub fn evaluate_batch(expr: &Expr, rows: &[Vec<f64>]) -> EvalReport {
    let values: Vec<f64> = rows.iter().map(|row| evaluate(expr, row).unwrap_or(f64::NAN)).collect();
    let domain_violations = values.iter().filter(|v| v.is_nan()).count();
    EvalReport {
        values,
        domain_violations,
    }
}

/// Column-wise evaluation over a column-major feature matrix.
///
/// Equivalent to [`evaluate_batch`] under [`Raw`] semantics but much faster
/// for large row counts; search engines plug in their own [`Semantics`].
pub fn evaluate_columns<S: Semantics>(expr: &Expr, columns: &[Vec<f64>], n_rows: usize, semantics: &S) -> EvalReport {
    let values = eval_node(expr, columns, n_rows, semantics);
    let domain_violations = values.iter().filter(|v| v.is_nan()).count();
    EvalReport {
        values,
        domain_violations,
    }
}

fn eval_node<S: Semantics>(expr: &Expr, cols: &[Vec<f64>], n: usize, sem: &S) -> Vec<f64> {
    match expr {
        Expr::Const(c) => vec![*c; n],
        Expr::Var(i) => cols[*i][..n].to_vec(),
        Expr::Unary(op, c) => {
            let mut v = eval_node(c, cols, n, sem);
            for x in v.iter_mut() {
                *x = sem.unary(*op, *x);
            }
            v
        }
        Expr::Binary(op, l, r) => {
            let mut a = eval_node(l, cols, n, sem);
            // constant right operands are common (x * 2, x ** 2)
            if let Expr::Const(c) = **r {
                for x in a.iter_mut() {
                    *x = sem.binary(*op, *x, c);
                }
            } else {
                let b = eval_node(r, cols, n, sem);
                for (x, y) in a.iter_mut().zip(b) {
                    *x = sem.binary(*op, *x, y);
                }
            }
            a
        }
    }
}
