use serde::{Deserialize, Serialize};

use crate::expr::{eval_binary_raw, eval_unary_raw, BinaryOp, Expr, Semantics, UnaryOp, DIV_EPSILON};

/// How division behaves while the search runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DivisionPolicy {
    /// `a / b` with `|b| < 1e-12` evaluating to 1.
    Protected,
    /// `a / sqrt(1 + b^2)`.
    #[default]
    AnalyticQuotient,
    /// Exact division; violations make the individual unfit.
    Raw,
}

/// Total operator semantics used during search. `log` and `sqrt` act on
/// `|x|`, division follows the configured policy. Overflow still yields NaN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Protected {
    pub division: DivisionPolicy,
}

const LOG_FLOOR: f64 = 1e-12;

impl Semantics for Protected {
    #[inline]
    fn unary(&self, op: UnaryOp, x: f64) -> f64 {
        match op {
            UnaryOp::Log => eval_unary_raw(UnaryOp::Log, x.abs() + LOG_FLOOR),
            UnaryOp::Sqrt => eval_unary_raw(UnaryOp::Sqrt, x.abs()),
            _ => eval_unary_raw(op, x),
        }
    }

    #[inline]
    fn binary(&self, op: BinaryOp, a: f64, b: f64) -> f64 {
        if op != BinaryOp::Div {
            return eval_binary_raw(op, a, b);
        }
        match self.division {
            DivisionPolicy::Raw => eval_binary_raw(op, a, b),
            DivisionPolicy::Protected => {
                if b.abs() < DIV_EPSILON {
                    if a.is_nan() || b.is_nan() {
                        f64::NAN
                    } else {
                        1.0
                    }
                } else {
                    eval_binary_raw(op, a, b)
                }
            }
            DivisionPolicy::AnalyticQuotient => {
                let v = a / (1.0 + b * b).sqrt();
                if v.is_finite() {
                    v
                } else {
                    f64::NAN
                }
            }
        }
    }
}

/// Rewrites a search-time tree into an expression whose exact semantics
/// match what the search optimised.
///
/// Analytic quotients become `a / sqrt(1 + b ** 2)`, `log` and `sqrt` get an
/// `abs` around their argument. Protected division is left as plain division.
pub fn materialize(expr: &Expr, division: DivisionPolicy) -> Expr {
    expr.map_bottom_up(&mut |node| match node {
        Expr::Unary(op @ (UnaryOp::Log | UnaryOp::Sqrt), c) => {
            let arg = match *c {
                Expr::Unary(UnaryOp::Abs, _) => *c,
                Expr::Const(v) => Expr::Const(v.abs()),
                other => other.abs(),
            };
            Expr::unary(op, arg)
        }
        Expr::Binary(BinaryOp::Div, a, b) if division == DivisionPolicy::AnalyticQuotient => {
            let den = match *b {
                Expr::Const(v) => Expr::Const((1.0 + v * v).sqrt()),
                other => (1.0 + other.powi(2)).sqrt(),
            };
            Expr::binary(BinaryOp::Div, *a, den)
        }
        other => other,
    })
}
