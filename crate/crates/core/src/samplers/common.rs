//! Machinery shared by the imputation and observed-data algorithms:
//! conjugate coefficient draws for Gaussian regression blocks,
//! sufficient-statistic log likelihoods for the separation-strategy
//! (sd / correlation) updates, and recording of derived gamma quantities.

use super::{ChainConfig, GridSpec, SamplerError};
use crate::data::Dataset;
use crate::model::{
    self, CorrelationState, Design, MeanCoefs, MeanStructure, ModelSpec, OutcomeSds,
};
use crate::mvn;
use crate::priors::PriorKind;
use crate::samplers::griddy::griddy_gibbs_draw;
use crate::stats;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Lower bound of every standard-deviation sampling support.
pub const SD_SUPPORT_FLOOR: f64 = 1e-4;

/// A multivariate Gaussian regression block `y_i = B x_i + e_i`,
/// `e_i ~ N(0, D R D)`, with `m` outcomes and `p` design columns.
pub struct RegressionBlock {
    /// n x m outcome matrix.
    pub y: DMatrix<f64>,
    /// n x p design matrix (first column all ones).
    pub x: DMatrix<f64>,
    /// m x p coefficient matrix.
    pub b: DMatrix<f64>,
}

impl RegressionBlock {
    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn m(&self) -> usize {
        self.y.ncols()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Residual cross-product matrix `S = E^T E` for the current
    /// coefficients.
    pub fn residual_crossprod(&self) -> DMatrix<f64> {
        let resid = &self.y - &self.x * self.b.transpose();
        resid.transpose() * resid
    }

    /// Conjugate draw of the coefficient matrix given the residual
    /// covariance `sigma` and an independent `N(0, prior_sd^2)` prior on
    /// every coefficient. With no rows this reduces to a prior draw.
    pub fn draw_coefs(
        &mut self,
        sigma: &DMatrix<f64>,
        prior_sd: f64,
        rng: &mut impl Rng,
    ) -> Result<(), SamplerError> {
        let m = self.m();
        let p = self.p();
        let dim = m * p;
        let sigma_inv = Cholesky::new(sigma.clone())
            .ok_or_else(|| SamplerError::ChainDiverged("residual covariance not PD".into()))?
            .inverse();

        let xtx = self.x.transpose() * &self.x;
        let c = self.y.transpose() * &self.x; // m x p cross moment Y^T X
        let tau = 1.0 / (prior_sd * prior_sd);

        let mut precision = DMatrix::zeros(dim, dim);
        for j in 0..p {
            for k in 0..p {
                for a in 0..m {
                    for cc in 0..m {
                        precision[(j * m + a, k * m + cc)] = xtx[(j, k)] * sigma_inv[(a, cc)];
                    }
                }
            }
        }
        for d in 0..dim {
            precision[(d, d)] += tau;
        }
        let sc = &sigma_inv * &c; // m x p
        let mut rhs = DVector::zeros(dim);
        for j in 0..p {
            for a in 0..m {
                rhs[j * m + a] = sc[(a, j)];
            }
        }

        let chol = Cholesky::new(precision)
            .ok_or_else(|| SamplerError::ChainDiverged("coefficient precision not PD".into()))?;
        let mean = chol.solve(&rhs);
        let z = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
        // Covariance is P^-1 = L^-T L^-1, so mean + L^-T z has the right law.
        let mut lt = chol.l().transpose();
        let draw = mean + solve_upper(&mut lt, &z);
        for j in 0..p {
            for a in 0..m {
                self.b[(a, j)] = draw[j * m + a];
            }
        }
        Ok(())
    }
}

fn solve_upper(u: &mut DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = b.len();
    let mut x = DVector::zeros(n);
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= u[(i, k)] * x[k];
        }
        x[i] = s / u[(i, i)];
    }
    x
}

/// `-n/2 log det R - 1/2 tr(R^-1 M)` for a correlation matrix `R` and the
/// standardized residual cross-product `M = D^-1 S D^-1`; `-inf` when `R`
/// is not positive definite (zero posterior mass).
pub fn corr_log_likelihood(r: &DMatrix<f64>, m_star: &DMatrix<f64>, n: f64) -> f64 {
    let chol = match mvn::cholesky(r) {
        Ok(c) => c,
        Err(_) => return f64::NEG_INFINITY,
    };
    let dim = r.nrows();
    let mut log_det = 0.0;
    for i in 0..dim {
        log_det += chol[(i, i)].ln();
    }
    // tr(R^-1 M) via two triangular solves per column.
    let mut trace = 0.0;
    for c in 0..dim {
        let col = DVector::from_column_slice(m_star.column(c).as_slice());
        let y = forward(&chol, &col);
        let x = backward(&chol, &y);
        trace += x[c];
    }
    -n * log_det - 0.5 * trace
}

fn forward(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
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

fn backward(l: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
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

/// Log conditional of a standard-deviation entry (up to a constant):
/// `-n log d_j - 1/2 tr(R^-1 D^-1 S D^-1)` as a function of `sds[j]`.
pub fn sd_log_likelihood(
    r_inv: &DMatrix<f64>,
    s_resid: &DMatrix<f64>,
    sds: &[f64],
    j: usize,
    value: f64,
    n: f64,
) -> f64 {
    let dim = sds.len();
    let mut d = sds.to_vec();
    d[j] = value;
    let mut trace = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            trace += r_inv[(a, b)] * s_resid[(a, b)] / (d[a] * d[b]);
        }
    }
    -n * value.ln() - 0.5 * trace
}

/// Griddy update of one standard deviation.
#[allow(clippy::too_many_arguments)]
pub fn update_sd(
    sds: &mut [f64],
    j: usize,
    r: &DMatrix<f64>,
    s_resid: &DMatrix<f64>,
    n: f64,
    support_hi: f64,
    prior: Option<&PriorKind>,
    grid: &GridSpec,
    rng: &mut impl Rng,
) -> Result<(), SamplerError> {
    let r_inv = Cholesky::new(r.clone())
        .ok_or_else(|| SamplerError::ChainDiverged("correlation matrix not PD".into()))?
        .inverse();
    let current = sds.to_vec();
    let target = |v: f64| {
        let lik = sd_log_likelihood(&r_inv, s_resid, &current, j, v, n);
        match prior {
            Some(p) => lik + p.log_density(v),
            None => lik,
        }
    };
    sds[j] = griddy_gibbs_draw(target, (SD_SUPPORT_FLOOR, support_hi), grid, rng)?;
    Ok(())
}

/// Support ceiling for a standard-deviation grid: ten times the empirical
/// sd of the relevant observed outcome, with a unit fallback when no data
/// are available.
pub fn sd_support_hi(observed: &[f64]) -> f64 {
    let s = stats::sd(observed);
    if s.is_finite() && s > 0.0 {
        10.0 * s
    } else {
        10.0
    }
}

/// Names for the mean-coefficient columns of one outcome.
pub fn coef_names(outcome: &str, covariate_names: &[String]) -> Vec<String> {
    let mut names = vec![format!("mean_{outcome}_intercept")];
    for c in covariate_names {
        names.push(format!("mean_{outcome}_{c}"));
    }
    names
}

/// Default covariate values at which conditional gamma0 draws are
/// recorded: both levels for a single binary covariate, otherwise the
/// sample mean vector.
pub fn default_gamma_at(data: &Dataset) -> Vec<Vec<f64>> {
    let k = data.n_covariates();
    if k == 0 {
        return Vec::new();
    }
    if k == 1 {
        let binary = data
            .records
            .iter()
            .all(|r| r.x[0] == 0.0 || r.x[0] == 1.0);
        if binary {
            return vec![vec![0.0], vec![1.0]];
        }
    }
    let n = data.records.len().max(1) as f64;
    let mut mean = vec![0.0; k];
    for rec in &data.records {
        for (j, v) in rec.x.iter().enumerate() {
            mean[j] += v / n;
        }
    }
    vec![mean]
}

pub fn gamma_label(covariate_names: &[String], x: &[f64]) -> String {
    let parts: Vec<String> = covariate_names
        .iter()
        .zip(x)
        .map(|(n, v)| format!("{n}={v}"))
        .collect();
    format!("gamma0[{}]", parts.join(","))
}

/// Everything needed to turn one parameter draw into gamma columns.
pub struct GammaRecorder {
    pub design: Design,
    pub covariate_names: Vec<String>,
    pub gamma_at: Vec<Vec<f64>>,
    pub marginal: bool,
    pub covariate_rows: Vec<Vec<f64>>,
    pub s_grid: Vec<f64>,
}

impl GammaRecorder {
    pub fn new(data: &Dataset, design: Design, cfg: &ChainConfig) -> Self {
        let conditional = design.is_conditional();
        let gamma_at = if !conditional {
            Vec::new()
        } else if cfg.gamma_at.is_empty() {
            default_gamma_at(data)
        } else {
            cfg.gamma_at.clone()
        };
        // Fixed s-grid from the observed surrogate values so the
        // marginal-gamma estimand does not wobble across draws.
        let s_obs: Vec<f64> = data.arm(1).filter_map(|r| r.s1).collect();
        let (m, sd) = if s_obs.len() >= 2 {
            (stats::mean(&s_obs), stats::sd(&s_obs))
        } else {
            (0.0, 1.0)
        };
        GammaRecorder {
            design,
            covariate_names: data.covariate_names.clone(),
            gamma_at,
            marginal: conditional && cfg.marginal_gammas,
            covariate_rows: data.covariate_rows(),
            s_grid: model::s_grid_around(m, sd),
        }
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.design.is_conditional() {
            names.push("gamma1".to_string());
            for x in &self.gamma_at {
                names.push(gamma_label(&self.covariate_names, x));
            }
            if self.marginal {
                names.push("gamma0_marg".to_string());
                names.push("gamma1_marg".to_string());
            }
        } else {
            names.push("gamma0".to_string());
            names.push("gamma1".to_string());
        }
        names
    }

    /// Gamma values for one parameter draw, in the order of `names()`.
    pub fn record(&self, spec: &ModelSpec) -> Result<Vec<f64>, SamplerError> {
        let mut out = Vec::new();
        if self.design.is_conditional() {
            let zero = vec![0.0; spec.n_covariates()];
            let g = model::gamma_conditional(spec, &zero)?;
            out.push(g.gamma1);
            for x in &self.gamma_at {
                out.push(model::gamma_conditional(spec, x)?.gamma0);
            }
            if self.marginal {
                let curve =
                    model::marginalize_cep_empirical(spec, &self.covariate_rows, &self.s_grid)?;
                let line = curve.fitted_line()?;
                out.push(line.gamma0);
                out.push(line.gamma1);
            }
        } else {
            let g = model::gamma_from_marginal(spec)?;
            out.push(g.gamma0);
            out.push(g.gamma1);
        }
        Ok(out)
    }
}

/// Assembles a `ModelSpec` snapshot of the current sampler state.
pub fn spec_from_state(
    design: Design,
    mean: MeanStructure,
    sds: [f64; 3],
    corr: CorrelationState,
) -> ModelSpec {
    ModelSpec {
        design,
        mean,
        sds: OutcomeSds { s1: sds[0], t0: sds[1], t1: sds[2] },
        corr,
        covariate: model::CovariateModel::None,
    }
}

/// Mean structure from a 3 x p coefficient matrix in outcome order
/// `(S(1), T(0), T(1))`.
pub fn mean_from_matrix(b: &DMatrix<f64>) -> MeanStructure {
    let coefs = |row: usize| MeanCoefs {
        intercept: b[(row, 0)],
        slopes: (1..b.ncols()).map(|j| b[(row, j)]).collect(),
    };
    MeanStructure { s1: coefs(0), t0: coefs(1), t1: coefs(2) }
}

/// Design matrix with an intercept column followed by the covariate
/// columns of `rows` (or intercept only for marginal designs).
pub fn design_matrix(rows: &[&Vec<f64>], conditional: bool, k: usize) -> DMatrix<f64> {
    let p = if conditional { 1 + k } else { 1 };
    let mut x = DMatrix::zeros(rows.len(), p);
    for (i, r) in rows.iter().enumerate() {
        x[(i, 0)] = 1.0;
        if conditional {
            for j in 0..k {
                x[(i, 1 + j)] = r[j];
            }
        }
    }
    x
}
