//! Dense multivariate-Gaussian machinery for the small (dim <= 4) joints
//! used throughout the crate: Cholesky factorization with an explicit
//! positive-definiteness tolerance, conditional distributions, log
//! densities, and the bound that keeps a 3x3 correlation matrix positive
//! definite when one entry varies.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative pivot tolerance for Cholesky: a pivot must exceed
/// `PD_TOL * max(diagonal)` or the matrix is rejected.
pub const PD_TOL: f64 = 1e-12;

/// Margin by which open positive-definiteness intervals are shrunk before
/// samplers draw from them, so draws never sit on a singular boundary.
pub const PD_EDGE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MvnError {
    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric")]
    NotSymmetric,
}

/// A proper multivariate normal: mean vector plus a symmetric positive
/// definite covariance. Construction validates shape, symmetry and
/// positive definiteness, so a value of this type is always usable.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianJoint {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianJoint {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self, MvnError> {
        if covariance.nrows() != covariance.ncols() || covariance.nrows() != mean.len() {
            return Err(MvnError::DimensionMismatch {
                expected: mean.len(),
                got: covariance.nrows(),
            });
        }
        let n = mean.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let a = covariance[(i, j)];
                let b = covariance[(j, i)];
                let scale = a.abs().max(b.abs()).max(1.0);
                if (a - b).abs() > 1e-10 * scale {
                    return Err(MvnError::NotSymmetric);
                }
            }
        }
        // Rejects non-PD input early.
        cholesky(&covariance)?;
        Ok(Self { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Log of the joint density at `x`.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64, MvnError> {
        if x.len() != self.dim() {
            return Err(MvnError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let chol = cholesky(&self.covariance)?;
        let mut log_det = 0.0;
        for i in 0..self.dim() {
            log_det += chol[(i, i)].ln();
        }
        // Solve L z = (x - mu) by forward substitution; the quadratic form
        // is then |z|^2.
        let diff = x - &self.mean;
        let z = forward_solve(&chol, &diff);
        let quad = z.dot(&z);
        Ok(-0.5 * (self.dim() as f64) * (2.0 * std::f64::consts::PI).ln() - log_det - 0.5 * quad)
    }

    /// Distribution of the remaining coordinates given that the coordinates
    /// in `observed_idx` equal `observed_vals`. The conditional covariance
    /// does not depend on the observed values.
    pub fn conditional(
        &self,
        observed_idx: &[usize],
        observed_vals: &[f64],
    ) -> Result<GaussianJoint, MvnError> {
        conditional_gaussian(self, observed_idx, observed_vals)
    }

    /// Draw one sample using the Cholesky factor of the covariance.
    pub fn sample(&self, rng: &mut impl rand::Rng) -> Result<DVector<f64>, MvnError> {
        let chol = cholesky(&self.covariance)?;
        let z = DVector::from_fn(self.dim(), |_, _| {
            rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
        });
        Ok(&self.mean + chol * z)
    }
}

/// Lower-triangular Cholesky factor `L` with `L * L^T = m`. Fails with
/// `NotPositiveDefinite` when any pivot falls at or below
/// `PD_TOL * max(diagonal)`.
pub fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>, MvnError> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(MvnError::DimensionMismatch {
            expected: n,
            got: m.ncols(),
        });
    }
    let mut max_diag: f64 = 0.0;
    for i in 0..n {
        max_diag = max_diag.max(m[(i, i)].abs());
    }
    let tol = PD_TOL * max_diag.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > tol) {
            return Err(MvnError::NotPositiveDefinite { row: j, pivot: d });
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Ok(l)
}

fn forward_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = b.len();
    let mut z = DVector::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    z
}

/// The value-independent pieces of a Gaussian conditional: the weight
/// matrix `W = (S22^-1 S21)^T` (remaining x observed) and the conditional
/// covariance `S11 - S12 S22^-1 S21`. The conditional mean at observed
/// values `v` is `mu_rem + W (v - mu_obs)`.
pub fn conditional_parts(
    cov: &DMatrix<f64>,
    observed_idx: &[usize],
) -> Result<(DMatrix<f64>, DMatrix<f64>), MvnError> {
    let dim = cov.nrows();
    if observed_idx.is_empty() || observed_idx.len() >= dim {
        return Err(MvnError::DimensionMismatch {
            expected: dim,
            got: observed_idx.len(),
        });
    }
    for &i in observed_idx {
        if i >= dim {
            return Err(MvnError::IndexOutOfRange { index: i, dim });
        }
    }
    let remaining: Vec<usize> = (0..dim).filter(|i| !observed_idx.contains(i)).collect();
    if remaining.len() + observed_idx.len() != dim {
        // A duplicated observed index would shrink the remaining set.
        return Err(MvnError::IndexOutOfRange {
            index: observed_idx[0],
            dim,
        });
    }

    let s22 = cov.select_rows(observed_idx).select_columns(observed_idx);
    let s12 = cov.select_rows(&remaining).select_columns(observed_idx);
    let s11 = cov.select_rows(&remaining).select_columns(&remaining);

    let l22 = cholesky(&s22)?;
    // S22^-1 S21 computed column-by-column through the factor.
    let s21 = s12.transpose();
    let mut w = DMatrix::zeros(observed_idx.len(), remaining.len());
    for c in 0..remaining.len() {
        let col = DVector::from_column_slice(s21.column(c).as_slice());
        let y = forward_solve(&l22, &col);
        let x = backward_solve(&l22, &y);
        w.set_column(c, &x);
    }

    let mut cond_cov = s11 - &s12 * &w;
    // Symmetrize: the subtraction can leave 1e-17-scale asymmetry.
    for i in 0..cond_cov.nrows() {
        for j in (i + 1)..cond_cov.ncols() {
            let v = 0.5 * (cond_cov[(i, j)] + cond_cov[(j, i)]);
            cond_cov[(i, j)] = v;
            cond_cov[(j, i)] = v;
        }
    }
    Ok((w.transpose(), cond_cov))
}

/// Conditional distribution `remaining | observed = observed_vals` of a
/// joint Gaussian: mean `mu1 + S12 S22^-1 (x2 - mu2)`, covariance
/// `S11 - S12 S22^-1 S21`.
pub fn conditional_gaussian(
    joint: &GaussianJoint,
    observed_idx: &[usize],
    observed_vals: &[f64],
) -> Result<GaussianJoint, MvnError> {
    if observed_idx.len() != observed_vals.len() {
        return Err(MvnError::DimensionMismatch {
            expected: observed_idx.len(),
            got: observed_vals.len(),
        });
    }
    let (w, cond_cov) = conditional_parts(joint.covariance(), observed_idx)?;
    let dim = joint.dim();
    let mu = joint.mean();
    let remaining: Vec<usize> = (0..dim).filter(|i| !observed_idx.contains(i)).collect();
    let mut diff = DVector::zeros(observed_idx.len());
    for (k, &i) in observed_idx.iter().enumerate() {
        diff[k] = observed_vals[k] - mu[i];
    }
    let mu1 = DVector::from_iterator(remaining.len(), remaining.iter().map(|&i| mu[i]));
    let cond_mean = mu1 + w * diff;
    GaussianJoint::new(cond_mean, cond_cov)
}

fn backward_solve(l: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let n = y.len();
    let mut x = DVector::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Open interval of values `r23` for which the 3x3 correlation matrix with
/// fixed entries `r12`, `r13` stays positive definite:
/// `r12*r13 ± sqrt((1-r12^2)(1-r13^2))`.
pub fn pd_bound_third(r12: f64, r13: f64) -> (f64, f64) {
    debug_assert!(r12.abs() < 1.0 && r13.abs() < 1.0);
    let center = r12 * r13;
    let half_width = ((1.0 - r12 * r12) * (1.0 - r13 * r13)).sqrt();
    (center - half_width, center + half_width)
}

/// `pd_bound_third` shrunk inward by [`PD_EDGE`], the interval samplers
/// actually draw from.
pub fn pd_bound_third_inner(r12: f64, r13: f64) -> (f64, f64) {
    let (lo, hi) = pd_bound_third(r12, r13);
    (lo + PD_EDGE, hi - PD_EDGE)
}

/// Builds the 3x3 correlation matrix
/// `[[1, r10, r11], [r10, 1, rt], [r11, rt, 1]]` in the crate-wide outcome
/// order `(S(1), T(0), T(1))`.
pub fn correlation_matrix(theta10: f64, theta11: f64, theta_t: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[1.0, theta10, theta11, theta10, 1.0, theta_t, theta11, theta_t, 1.0],
    )
}
