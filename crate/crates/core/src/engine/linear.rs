use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::datagen::Dataset;
use crate::expr::Expr;

/// Ridge penalty used when the design matrix is rank deficient.
pub const RIDGE_LAMBDA: f64 = 1e-8;

/// Relative threshold on the diagonal of R below which a column counts as
/// linearly dependent.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub expr: Expr,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// The least-squares system was rank deficient and the ridge fallback
    /// produced these coefficients.
    pub rank_deficient: bool,
}

fn design(ds: &Dataset) -> DMatrix<f64> {
    let (n, d) = (ds.n_rows(), ds.n_features());
    DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { ds.features[i][j - 1] })
}

fn is_full_rank(r: &DMatrix<f64>) -> bool {
    let diag: Vec<f64> = (0..r.ncols().min(r.nrows())).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    r.nrows() >= r.ncols() && max > 0.0 && diag.iter().all(|&v| v > RANK_TOLERANCE * max)
}

/// Ordinary least squares `c0 + sum_i c_i x_i` through a Householder QR.
///
/// Falls back to ridge regression with [`RIDGE_LAMBDA`] (solved as an
/// augmented least-squares problem) when the design is rank deficient.
pub fn fit_linear(ds: &Dataset) -> Result<LinearFit, EngineError> {
    if ds.n_rows() == 0 {
        return Err(EngineError::EmptyDataset);
    }
    let a = design(ds);
    let y = DVector::from_column_slice(&ds.target);
    let p = a.ncols();

    let qr = a.clone().qr();
    let (beta, rank_deficient) = if is_full_rank(&qr.r()) {
        let qty = qr.q().transpose() * &y;
        let beta = qr
            .r()
            .solve_upper_triangular(&qty)
            .ok_or(EngineError::Numerical("triangular solve failed"))?;
        (beta, false)
    } else {
        let n = a.nrows();
        let mut aug = DMatrix::zeros(n + p, p);
        aug.view_mut((0, 0), (n, p)).copy_from(&a);
        for j in 0..p {
            aug[(n + j, j)] = RIDGE_LAMBDA.sqrt();
        }
        let mut rhs = DVector::zeros(n + p);
        rhs.rows_mut(0, n).copy_from(&y);
        let qr = aug.qr();
        let qty = qr.q().transpose() * rhs;
        let beta = qr
            .r()
            .solve_upper_triangular(&qty)
            .ok_or(EngineError::Numerical("ridge solve failed"))?;
        (beta, true)
    };

    let intercept = beta[0];
    let coefficients: Vec<f64> = beta.iter().skip(1).cloned().collect();
    Ok(LinearFit {
        expr: affine_expr(intercept, &coefficients),
        intercept,
        coefficients,
        rank_deficient,
    })
}

/// `c0 + c1*x0 + c2*x1 + ...`, skipping exact zero coefficients.
pub fn affine_expr(intercept: f64, coefficients: &[f64]) -> Expr {
    let mut e = Expr::constant(intercept);
    for (j, &c) in coefficients.iter().enumerate() {
        if c != 0.0 {
            e = e + c * Expr::var(j);
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::evaluate_batch;

    fn dataset(xs: &[f64], f: impl Fn(f64) -> f64) -> Dataset {
        Dataset::new(
            "t",
            xs.iter().map(|&x| vec![x]).collect(),
            xs.iter().map(|&x| f(x)).collect(),
        )
    }

    #[test]
    fn exact_line() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5 - 3.0).collect();
        let fit = fit_linear(&dataset(&xs, |x| 2.0 * x)).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert!(!fit.rank_deficient);
    }

    #[test]
    fn symmetric_parabola_has_no_slope() {
        let xs: Vec<f64> = (-30..=30).map(|i| i as f64 / 10.0).collect();
        let fit = fit_linear(&dataset(&xs, |x| x * x)).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_uses_ridge() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 3.0 * i as f64 + 1.0).collect();
        let fit = fit_linear(&Dataset::new("dup", rows.clone(), y.clone())).unwrap();
        assert!(fit.rank_deficient);
        assert!((fit.coefficients[0] + fit.coefficients[1] - 3.0).abs() < 1e-6);
        let pred = evaluate_batch(&fit.expr, &rows).values;
        for (p, t) in pred.iter().zip(&y) {
            assert!((p - t).abs() < 1e-6);
        }
    }

    #[test]
    fn fewer_rows_than_parameters_still_fits() {
        let fit = fit_linear(&Dataset::new("tiny", vec![vec![1.0, 2.0]], vec![5.0])).unwrap();
        assert!(fit.rank_deficient);
    }

    #[test]
    fn empty_dataset() {
        assert!(matches!(
            fit_linear(&Dataset::new("e", vec![], vec![])),
            Err(EngineError::EmptyDataset)
        ));
    }
}
