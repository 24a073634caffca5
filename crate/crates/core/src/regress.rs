//! Ordinary least squares on small design matrices, used by the treatment
//! effect models, the complete-data oracle and the CEP-line summaries.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegressError {
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
}

/// Least-squares fit of `y` on the columns of `x` (callers add their own
/// intercept column).
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefs: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Residual variance with n - p denominator.
    pub sigma2: f64,
}

pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit, RegressError> {
    let n = x.nrows();
    let p = x.ncols();
    if n <= p {
        return Err(RegressError::TooFewRows { needed: p + 1, got: n });
    }
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let chol = nalgebra::Cholesky::new(xtx).ok_or(RegressError::RankDeficient)?;
    let coefs = chol.solve(&xty);
    let resid = y - x * &coefs;
    let sigma2 = resid.dot(&resid) / (n - p) as f64;
    let cov = chol.inverse() * sigma2;
    let std_errors = (0..p).map(|j| cov[(j, j)].sqrt()).collect();
    Ok(OlsFit {
        coefs: coefs.iter().copied().collect(),
        std_errors,
        sigma2,
    })
}

/// Convenience wrapper: regression with an intercept prepended to the
/// covariate columns. Returns the fit over `[1, cols...]`.
pub fn ols_with_intercept(cols: &[Vec<f64>], y: &[f64]) -> Result<OlsFit, RegressError> {
    let n = y.len();
    let p = cols.len() + 1;
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for (j, col) in cols.iter().enumerate() {
            x[(i, j + 1)] = col[i];
        }
    }
    ols(&x, &DVector::from_column_slice(y))
}
