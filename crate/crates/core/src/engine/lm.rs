use nalgebra::{DMatrix, DVector};

use crate::datagen::Dataset;
use crate::expr::{evaluate_columns, Expr, Raw, Semantics};

/// Relative step of the central-difference Jacobian: `h = 1e-6 * (1 + |c|)`.
pub const JACOBIAN_STEP: f64 = 1e-6;

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e12;

/// Outcome of a constant-tuning run.
#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    pub expr: Expr,
    pub sse: f64,
    /// Accepted steps.
    pub iterations: usize,
}

/// Sum of squared errors; `inf` when any prediction is undefined.
pub fn sse<S: Semantics>(expr: &Expr, columns: &[Vec<f64>], target: &[f64], sem: &S) -> f64 {
    let pred = evaluate_columns(expr, columns, target.len(), sem).values;
    let mut total = 0.0;
    for (p, y) in pred.iter().zip(target) {
        let r = y - p;
        total += r * r;
    }
    if total.is_nan() {
        f64::INFINITY
    } else {
        total
    }
}

fn predictions<S: Semantics>(expr: &Expr, columns: &[Vec<f64>], n: usize, sem: &S) -> Option<Vec<f64>> {
    let v = evaluate_columns(expr, columns, n, sem).values;
    v.iter().all(|x| x.is_finite()).then_some(v)
}

/// Central finite-difference Jacobian of the predictions with respect to the
/// constants of `expr` (pre-order), using step `step * (1 + |c|)`.
///
/// `None` when a perturbed model is undefined on some row.
pub fn finite_difference_jacobian<S: Semantics>(
    expr: &Expr,
    columns: &[Vec<f64>],
    n_rows: usize,
    step: f64,
    sem: &S,
) -> Option<DMatrix<f64>> {
    let params = expr.constants();
    let mut jac = DMatrix::zeros(n_rows, params.len());
    let mut shifted = params.clone();
    for (j, &c) in params.iter().enumerate() {
        let h = step * (1.0 + c.abs());
        shifted[j] = c + h;
        let up = predictions(&expr.with_constants(&shifted)?, columns, n_rows, sem)?;
        shifted[j] = c - h;
        let down = predictions(&expr.with_constants(&shifted)?, columns, n_rows, sem)?;
        shifted[j] = c;
        for i in 0..n_rows {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    Some(jac)
}

/// Levenberg-Marquardt on the constants of `expr` under `sem`.
///
/// Steps that do not lower the SSE are rejected, so the returned SSE never
/// exceeds the starting one. Non-convergence returns the best point found.
pub fn optimize_constants_with<S: Semantics>(
    expr: &Expr,
    columns: &[Vec<f64>],
    target: &[f64],
    max_iters: usize,
    sem: &S,
) -> LmResult {
    let n = target.len();
    let mut best = expr.clone();
    let mut best_sse = sse(expr, columns, target, sem);
    let mut iterations = 0;
    if expr.constant_count() == 0 || !best_sse.is_finite() || n == 0 {
        return LmResult {
            expr: best,
            sse: best_sse,
            iterations,
        };
    }

    let y = DVector::from_column_slice(target);
    let mut lambda = LAMBDA_INIT;
    for _ in 0..max_iters {
        if best_sse == 0.0 {
            break;
        }
        let Some(pred) = predictions(&best, columns, n, sem) else {
            break;
        };
        let Some(jac) = finite_difference_jacobian(&best, columns, n, JACOBIAN_STEP, sem) else {
            break;
        };
        let resid = &y - DVector::from_vec(pred);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * resid;
        let params = DVector::from_vec(best.constants());

        let mut improved = false;
        while lambda < LAMBDA_MAX {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda * (jtj[(k, k)] + 1e-12);
            }
            let step = a.cholesky().map(|c| c.solve(&jtr));
            if let Some(delta) = step {
                let trial: Vec<f64> = (&params + delta).iter().cloned().collect();
                if let Some(candidate) = best.with_constants(&trial) {
                    let trial_sse = sse(&candidate, columns, target, sem);
                    if trial_sse < best_sse {
                        let gain = (best_sse - trial_sse) / best_sse;
                        best = candidate;
                        best_sse = trial_sse;
                        lambda = (lambda / 10.0).max(1e-12);
                        improved = true;
                        iterations += 1;
                        if gain < 1e-14 {
                            return LmResult {
                                expr: best,
                                sse: best_sse,
                                iterations,
                            };
                        }
                        break;
                    }
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    LmResult {
        expr: best,
        sse: best_sse,
        iterations,
    }
}

/// Tunes the constants of `expr` on `ds` under exact semantics.
pub fn optimize_constants(expr: &Expr, ds: &Dataset, iters: usize) -> Expr {
    optimize_constants_with(expr, &ds.columns(), &ds.target, iters, &Raw).expr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    fn dataset(xs: &[f64], f: impl Fn(f64) -> f64) -> Dataset {
        Dataset::new(
            "lm",
            xs.iter().map(|&x| vec![x]).collect(),
            xs.iter().map(|&x| f(x)).collect(),
        )
    }

    #[test]
    fn linear_in_parameter() {
        let ds = dataset(&grid(50, -3.0, 3.0), |x| 3.0 * x);
        let fit = optimize_constants(&parse("1.0 * x0").unwrap(), &ds, 20);
        assert!((fit.constants()[0] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn sine_amplitude_and_frequency() {
        let ds = dataset(&grid(200, -3.0, 3.0), |x| 0.17 * (5.5 * x).sin());
        let fit = optimize_constants(&parse("0.2 * sin(5.4 * x0)").unwrap(), &ds, 100);
        let c = fit.constants();
        assert!((c[0] - 0.17).abs() < 1e-3, "{c:?}");
        assert!((c[1] - 5.5).abs() < 1e-3, "{c:?}");
    }

    #[test]
    fn no_constants_is_identity() {
        let ds = dataset(&grid(10, 0.0, 1.0), |x| x);
        let e = parse("sin(x0)").unwrap();
        assert_eq!(optimize_constants(&e, &ds, 10), e);
    }

    #[test]
    fn never_increases_sse() {
        let ds = dataset(&grid(40, -2.0, 2.0), |x| (x * 1.3).exp() - x);
        let e = parse("2.0 * cos(0.5 * x0) + 0.1").unwrap();
        let before = sse(&e, &ds.columns(), &ds.target, &Raw);
        let after = optimize_constants_with(&e, &ds.columns(), &ds.target, 30, &Raw);
        assert!(after.sse <= before);
    }
}
