//! Analysis designs, endpoint transforms, the conditional-independence
//! constraint, and the surrogacy metrics.
//!
//! The crate-wide outcome ordering is `(S(1), T(0), T(1))`. A model is
//! either marginal (a plain trivariate Gaussian) or conditional on
//! baseline covariates, in which case each outcome mean is linear in the
//! covariate columns and the covariance is constant:
//!
//! ```text
//! (S(1), T(0), T(1)) | x  ~  N( intercepts + slopes * x,  D R D )
//! ```
//!
//! with `D = diag(eps_s1, eps_t0, eps_t1)` and `R` the 3x3 correlation
//! matrix holding `theta10`, `theta11`, `theta_t`.
//!
//! The surrogate quality summary is the line
//! `E(T(1) - T(0) | S(1) = s, ...) = gamma0 + gamma1 * s`; a valid
//! surrogate has `gamma0 = 0` and `gamma1 != 0`.

use crate::data::Dataset;
use crate::mvn::{self, GaussianJoint, MvnError};
use crate::quad;
use crate::regress::{self, RegressError};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("surrogate variance is degenerate ({0})")]
    DegenerateVariance(f64),
    #[error("dataset has no designated baseline column for difference-from-baseline endpoints")]
    MissingBaseline,
    #[error("marginalization weights degenerate at s = {0}")]
    QuadratureFailure(f64),
    #[error(transparent)]
    RankDeficient(#[from] RegressError),
    #[error("operation requires a marginal specification")]
    NotMarginal,
    #[error("operation requires a conditional specification")]
    NotConditional,
    #[error(transparent)]
    Mvn(#[from] MvnError),
    #[error("invalid model specification: {0}")]
    Invalid(String),
}

/// The four analysis designs: original endpoint or difference from
/// baseline, each either marginal or conditional on covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Design {
    OriginalMarginal,
    OriginalConditional,
    DiffMarginal,
    DiffConditional,
}

impl Design {
    pub fn number(self) -> u8 {
        match self {
            Design::OriginalMarginal => 1,
            Design::OriginalConditional => 2,
            Design::DiffMarginal => 3,
            Design::DiffConditional => 4,
        }
    }

    pub fn from_number(n: u8) -> Option<Design> {
        match n {
            1 => Some(Design::OriginalMarginal),
            2 => Some(Design::OriginalConditional),
            3 => Some(Design::DiffMarginal),
            4 => Some(Design::DiffConditional),
            _ => None,
        }
    }

    pub fn is_conditional(self) -> bool {
        matches!(self, Design::OriginalConditional | Design::DiffConditional)
    }

    pub fn endpoint(self) -> EndpointMode {
        match self {
            Design::OriginalMarginal | Design::OriginalConditional => EndpointMode::Original,
            Design::DiffMarginal | Design::DiffConditional => EndpointMode::DiffFromBaseline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndpointMode {
    Original,
    DiffFromBaseline,
}

/// Generative model of a scalar baseline covariate, when known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovariateModel {
    /// No covariate, or covariate distribution left unspecified.
    None,
    Normal { mean: f64, sd: f64 },
    Bernoulli { p: f64 },
}

/// Mean coefficients for one outcome: intercept plus one slope per
/// covariate column.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCoefs {
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

impl MeanCoefs {
    pub fn marginal(intercept: f64) -> Self {
        MeanCoefs { intercept, slopes: Vec::new() }
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(self.slopes.len(), x.len());
        self.intercept + self.slopes.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanStructure {
    pub s1: MeanCoefs,
    pub t0: MeanCoefs,
    pub t1: MeanCoefs,
}

impl MeanStructure {
    pub fn means_at(&self, x: &[f64]) -> [f64; 3] {
        [self.s1.value_at(x), self.t0.value_at(x), self.t1.value_at(x)]
    }
}

/// Per-outcome residual standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeSds {
    pub s1: f64,
    pub t0: f64,
    pub t1: f64,
}

impl OutcomeSds {
    pub fn as_array(&self) -> [f64; 3] {
        [self.s1, self.t0, self.t1]
    }
}

/// The three outcome correlations. Under the conditional-independence
/// constraint `S(1) ⊥ T(0) | T(1)` the entry `theta10` is never free: it
/// is always the product `theta_t * theta11`, which this representation
/// enforces structurally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationState {
    Free { theta10: f64, theta11: f64, theta_t: f64 },
    ConditionalIndependence { theta11: f64, theta_t: f64 },
}

impl CorrelationState {
    pub fn theta10(&self) -> f64 {
        match *self {
            CorrelationState::Free { theta10, .. } => theta10,
            CorrelationState::ConditionalIndependence { theta11, theta_t } => {
                apply_ci_constraint(theta_t, theta11)
            }
        }
    }

    pub fn theta11(&self) -> f64 {
        match *self {
            CorrelationState::Free { theta11, .. }
            | CorrelationState::ConditionalIndependence { theta11, .. } => theta11,
        }
    }

    pub fn theta_t(&self) -> f64 {
        match *self {
            CorrelationState::Free { theta_t, .. }
            | CorrelationState::ConditionalIndependence { theta_t, .. } => theta_t,
        }
    }

    pub fn ci_assumed(&self) -> bool {
        matches!(self, CorrelationState::ConditionalIndependence { .. })
    }

    /// `theta11` is the only correlation the observed data identify.
    pub fn identified(&self, which: crate::priors::ParamTarget) -> bool {
        matches!(which, crate::priors::ParamTarget::Theta11)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        mvn::correlation_matrix(self.theta10(), self.theta11(), self.theta_t())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("theta10", self.theta10()),
            ("theta11", self.theta11()),
            ("theta_t", self.theta_t()),
        ] {
            if !(v > -1.0 && v < 1.0) {
                return Err(ModelError::Invalid(format!("{name} = {v} outside (-1, 1)")));
            }
        }
        mvn::cholesky(&self.matrix())?;
        Ok(())
    }
}

/// The conditional-independence constraint: `theta10 = theta_t * theta11`.
/// The product always lies strictly inside the positive-definiteness bound
/// for the third correlation, so the constrained matrix is always valid.
pub fn apply_ci_constraint(theta_t: f64, theta11: f64) -> f64 {
    theta_t * theta11
}

/// Departure from conditional independence on the scale of `spec`:
/// `theta10 - theta_t * theta11`, exactly zero for constrained states.
pub fn ci_deviation(spec: &ModelSpec) -> f64 {
    spec.corr.theta10() - spec.corr.theta_t() * spec.corr.theta11()
}

/// A fully parameterized analysis model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub design: Design,
    pub mean: MeanStructure,
    pub sds: OutcomeSds,
    pub corr: CorrelationState,
    pub covariate: CovariateModel,
}

impl ModelSpec {
    pub fn ci_assumed(&self) -> bool {
        self.corr.ci_assumed()
    }

    pub fn n_covariates(&self) -> usize {
        self.mean.s1.slopes.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let k = self.n_covariates();
        if self.mean.t0.slopes.len() != k || self.mean.t1.slopes.len() != k {
            return Err(ModelError::Invalid("uneven covariate slope lengths".into()));
        }
        if self.design.is_conditional() != (k > 0) {
            return Err(ModelError::Invalid(format!(
                "design {:?} inconsistent with {k} covariate columns",
                self.design
            )));
        }
        for (name, sd) in [("s1", self.sds.s1), ("t0", self.sds.t0), ("t1", self.sds.t1)] {
            if !(sd > 0.0) {
                return Err(ModelError::Invalid(format!("sd_{name} = {sd} not positive")));
            }
        }
        if matches!(
            self.covariate,
            CovariateModel::Normal { .. } | CovariateModel::Bernoulli { .. }
        ) && k != 1
        {
            return Err(ModelError::Invalid(
                "scalar covariate model requires exactly one covariate column".into(),
            ));
        }
        self.corr.validate()
    }

    /// Covariance matrix `D R D`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.sds.as_array();
        let mut m = self.corr.matrix();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] *= d[i] * d[j];
            }
        }
        m
    }

    /// The trivariate outcome distribution at covariate value `x`.
    pub fn joint_given_x(&self, x: &[f64]) -> Result<GaussianJoint, ModelError> {
        let mu = self.mean.means_at(x);
        Ok(GaussianJoint::new(
            DVector::from_row_slice(&mu),
            self.covariance(),
        )?)
    }

    /// Marginal mean and standard deviation of `S(1)` implied by the model
    /// and its covariate distribution.
    pub fn marginal_s1_moments(&self) -> (f64, f64) {
        let b = &self.mean.s1;
        match self.covariate {
            CovariateModel::None => (b.intercept, self.sds.s1),
            CovariateModel::Normal { mean, sd } => {
                let slope = b.slopes.first().copied().unwrap_or(0.0);
                (
                    b.intercept + slope * mean,
                    (self.sds.s1.powi(2) + slope * slope * sd * sd).sqrt(),
                )
            }
            CovariateModel::Bernoulli { p } => {
                let slope = b.slopes.first().copied().unwrap_or(0.0);
                let m = b.intercept + slope * p;
                let var = self.sds.s1.powi(2) + slope * slope * p * (1.0 - p);
                (m, var.sqrt())
            }
        }
    }
}

/// Where a gamma pair applies: to the whole population or at a fixed
/// covariate value.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaScope {
    Marginal,
    ConditionalAt(Vec<f64>),
}

/// The surrogacy validation pair: `E(T(1)-T(0) | s, .) = gamma0 + gamma1 s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationMetrics {
    pub gamma0: f64,
    pub gamma1: f64,
    pub scope: GammaScope,
}

/// The valid-surrogate verdict from posterior credible intervals: the
/// `gamma0` interval contains 0 and the `gamma1` interval excludes it.
pub fn surrogate_valid(gamma0_interval: (f64, f64), gamma1_interval: (f64, f64)) -> bool {
    let g0_covers = gamma0_interval.0 <= 0.0 && gamma0_interval.1 >= 0.0;
    let g1_covers = gamma1_interval.0 <= 0.0 && gamma1_interval.1 >= 0.0;
    g0_covers && !g1_covers
}

/// Gamma pair from a marginal (trivariate) specification:
/// `gamma1 = (rho11 sd_t1 - rho10 sd_t0) / sd_s1`, equivalently
/// `(Cov(T(1),S(1)) - Cov(T(0),S(1))) / Var(S(1))`, and
/// `gamma0 = (mu_t1 - mu_t0) - gamma1 mu_s1`.
pub fn gamma_from_marginal(spec: &ModelSpec) -> Result<ValidationMetrics, ModelError> {
    if spec.n_covariates() != 0 {
        return Err(ModelError::NotMarginal);
    }
    let var_s1 = spec.sds.s1 * spec.sds.s1;
    if !(var_s1 > 0.0) {
        return Err(ModelError::DegenerateVariance(var_s1));
    }
    let gamma1 =
        (spec.corr.theta11() * spec.sds.t1 - spec.corr.theta10() * spec.sds.t0) / spec.sds.s1;
    let gamma0 =
        (spec.mean.t1.intercept - spec.mean.t0.intercept) - gamma1 * spec.mean.s1.intercept;
    Ok(ValidationMetrics { gamma0, gamma1, scope: GammaScope::Marginal })
}

/// Gamma pair at covariate value `x` for a conditional specification. The
/// slope does not depend on `x`; only the intercept does.
pub fn gamma_conditional(spec: &ModelSpec, x: &[f64]) -> Result<ValidationMetrics, ModelError> {
    if spec.n_covariates() == 0 {
        return Err(ModelError::NotConditional);
    }
    if x.len() != spec.n_covariates() {
        return Err(ModelError::Invalid(format!(
            "covariate value has {} entries, model expects {}",
            x.len(),
            spec.n_covariates()
        )));
    }
    if !(spec.sds.s1 > 0.0) {
        return Err(ModelError::DegenerateVariance(spec.sds.s1 * spec.sds.s1));
    }
    let gamma1 =
        (spec.corr.theta11() * spec.sds.t1 - spec.corr.theta10() * spec.sds.t0) / spec.sds.s1;
    let [mu_s1, mu_t0, mu_t1] = spec.mean.means_at(x);
    let gamma0 = (mu_t1 - mu_t0) - gamma1 * mu_s1;
    Ok(ValidationMetrics {
        gamma0,
        gamma1,
        scope: GammaScope::ConditionalAt(x.to_vec()),
    })
}

/// Integrates a conditional model with a scalar Normal covariate into the
/// implied marginal trivariate model: means shift by `slope * mu_x`,
/// variances gain `slope^2 sigma_x^2`, covariances gain
/// `slope_j slope_k sigma_x^2`.
///
/// # Panics
/// Panics when the covariate model is not `Normal` (the transform is only
/// defined there).
pub fn collapse_over_x(spec: &ModelSpec) -> ModelSpec {
    let CovariateModel::Normal { mean: mu_x, sd: sd_x } = spec.covariate else {
        panic!("collapse_over_x requires a scalar Normal covariate model");
    };
    let var_x = sd_x * sd_x;
    let slopes = [
        spec.mean.s1.slopes[0],
        spec.mean.t0.slopes[0],
        spec.mean.t1.slopes[0],
    ];
    let intercepts = [
        spec.mean.s1.intercept,
        spec.mean.t0.intercept,
        spec.mean.t1.intercept,
    ];
    let eps = spec.sds.as_array();
    let r = spec.corr.matrix();

    let mut cov = DMatrix::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            cov[(i, j)] = r[(i, j)] * eps[i] * eps[j] + slopes[i] * slopes[j] * var_x;
        }
    }
    let sds = OutcomeSds {
        s1: cov[(0, 0)].sqrt(),
        t0: cov[(1, 1)].sqrt(),
        t1: cov[(2, 2)].sqrt(),
    };
    let corr = CorrelationState::Free {
        theta10: cov[(0, 1)] / (sds.s1 * sds.t0),
        theta11: cov[(0, 2)] / (sds.s1 * sds.t1),
        theta_t: cov[(1, 2)] / (sds.t0 * sds.t1),
    };
    let design = match spec.design.endpoint() {
        EndpointMode::Original => Design::OriginalMarginal,
        EndpointMode::DiffFromBaseline => Design::DiffMarginal,
    };
    ModelSpec {
        design,
        mean: MeanStructure {
            s1: MeanCoefs::marginal(intercepts[0] + slopes[0] * mu_x),
            t0: MeanCoefs::marginal(intercepts[1] + slopes[1] * mu_x),
            t1: MeanCoefs::marginal(intercepts[2] + slopes[2] * mu_x),
        },
        sds,
        corr,
        covariate: CovariateModel::None,
    }
}

/// Rewrites a conditional specification for the difference-from-baseline
/// endpoint `T_D(z) = T(z) - x_base`. Given the covariates, subtracting the
/// baseline column shifts its slope in both true-outcome means by -1 and
/// leaves the residual covariance untouched.
pub fn endpoint_transform_spec(
    spec: &ModelSpec,
    baseline_col: usize,
) -> Result<ModelSpec, ModelError> {
    if spec.n_covariates() == 0 || baseline_col >= spec.n_covariates() {
        return Err(ModelError::MissingBaseline);
    }
    let mut out = spec.clone();
    out.mean.t0.slopes[baseline_col] -= 1.0;
    out.mean.t1.slopes[baseline_col] -= 1.0;
    out.design = match spec.design {
        Design::OriginalMarginal | Design::DiffMarginal => Design::DiffMarginal,
        Design::OriginalConditional | Design::DiffConditional => Design::DiffConditional,
    };
    Ok(out)
}

/// Applies the difference-from-baseline transform to the observed and
/// counterfactual true-outcome slots of every record.
pub fn endpoint_transform_dataset(data: &Dataset, mode: EndpointMode) -> Result<Dataset, ModelError> {
    match mode {
        EndpointMode::Original => Ok(data.clone()),
        EndpointMode::DiffFromBaseline => {
            let col = data.baseline_col.ok_or(ModelError::MissingBaseline)?;
            let mut out = data.clone();
            for rec in &mut out.records {
                let base = rec.x[col];
                rec.t0 = rec.t0.map(|t| t - base);
                rec.t1 = rec.t1.map(|t| t - base);
            }
            Ok(out)
        }
    }
}

/// One causal-effect-predictiveness curve: the expected treatment effect on
/// `T` across surrogate strata `s`, with pointwise 95% bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct CepCurve {
    pub s_grid: Vec<f64>,
    pub expected_diff: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub conditioning: GammaScope,
}

impl CepCurve {
    /// Straight line from a gamma pair; the band collapses onto the line.
    pub fn from_line(metrics: &ValidationMetrics, s_grid: Vec<f64>) -> CepCurve {
        let expected: Vec<f64> = s_grid
            .iter()
            .map(|s| metrics.gamma0 + metrics.gamma1 * s)
            .collect();
        CepCurve {
            s_grid,
            expected_diff: expected.clone(),
            lower: expected.clone(),
            upper: expected,
            conditioning: metrics.scope.clone(),
        }
    }

    /// Ordinary least-squares line through the curve points, the summary
    /// used for marginal gamma estimates.
    pub fn fitted_line(&self) -> Result<ValidationMetrics, ModelError> {
        let fit = regress::ols_with_intercept(std::slice::from_ref(&self.s_grid), &self.expected_diff)?;
        Ok(ValidationMetrics {
            gamma0: fit.coefs[0],
            gamma1: fit.coefs[1],
            scope: GammaScope::Marginal,
        })
    }

    /// Largest absolute deviation of the curve from its own fitted line.
    pub fn max_line_deviation(&self) -> f64 {
        let line = match self.fitted_line() {
            Ok(l) => l,
            Err(_) => return f64::NAN,
        };
        self.s_grid
            .iter()
            .zip(&self.expected_diff)
            .map(|(s, e)| (e - (line.gamma0 + line.gamma1 * s)).abs())
            .fold(0.0, f64::max)
    }
}

/// Default 41-point grid spanning the marginal mean of `S(1)` plus/minus
/// three marginal standard deviations.
pub fn default_s_grid(spec: &ModelSpec) -> Vec<f64> {
    let (m, sd) = spec.marginal_s1_moments();
    s_grid_around(m, sd)
}

pub fn s_grid_around(mean: f64, sd: f64) -> Vec<f64> {
    let n = 41;
    (0..n)
        .map(|i| mean - 3.0 * sd + 6.0 * sd * i as f64 / (n - 1) as f64)
        .collect()
}

fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// Marginal CEP curve from a conditional model by averaging the
/// conditional curve over `f(x | S(1) = s) ∝ f(s | x) f(x)`. The covariate
/// weight is computed by 64-node Gauss-Hermite quadrature for a Normal
/// covariate and an exact two-term sum for a Bernoulli covariate.
pub fn marginalize_cep(spec: &ModelSpec, s_grid: &[f64]) -> Result<CepCurve, ModelError> {
    if spec.n_covariates() == 0 {
        // Already marginal: the curve is the exact line.
        let line = gamma_from_marginal(spec)?;
        return Ok(CepCurve::from_line(&line, s_grid.to_vec()));
    }
    let gamma1 = gamma_conditional(spec, &vec![0.0; spec.n_covariates()])?.gamma1;
    let g0_at = |x: &[f64]| -> f64 {
        let [mu_s1, mu_t0, mu_t1] = spec.mean.means_at(x);
        (mu_t1 - mu_t0) - gamma1 * mu_s1
    };

    let expected: Result<Vec<f64>, ModelError> = s_grid
        .iter()
        .map(|&s| {
            let (num, den) = match spec.covariate {
                CovariateModel::Normal { mean, sd } => {
                    let num = quad::normal_expectation(mean, sd, |x| {
                        g0_at(&[x]) * normal_pdf(s, spec.mean.s1.value_at(&[x]), spec.sds.s1)
                    });
                    let den = quad::normal_expectation(mean, sd, |x| {
                        normal_pdf(s, spec.mean.s1.value_at(&[x]), spec.sds.s1)
                    });
                    (num, den)
                }
                CovariateModel::Bernoulli { p } => {
                    let w0 = (1.0 - p) * normal_pdf(s, spec.mean.s1.value_at(&[0.0]), spec.sds.s1);
                    let w1 = p * normal_pdf(s, spec.mean.s1.value_at(&[1.0]), spec.sds.s1);
                    (w0 * g0_at(&[0.0]) + w1 * g0_at(&[1.0]), w0 + w1)
                }
                CovariateModel::None => {
                    return Err(ModelError::Invalid(
                        "marginalize_cep needs a covariate model or an empirical sample".into(),
                    ))
                }
            };
            if !(den > 1e-300) || !num.is_finite() {
                return Err(ModelError::QuadratureFailure(s));
            }
            Ok(num / den + gamma1 * s)
        })
        .collect();
    let expected = expected?;
    Ok(CepCurve {
        lower: expected.clone(),
        upper: expected.clone(),
        expected_diff: expected,
        s_grid: s_grid.to_vec(),
        conditioning: GammaScope::Marginal,
    })
}

/// Marginal CEP curve weighting an observed covariate sample instead of a
/// parametric covariate model.
pub fn marginalize_cep_empirical(
    spec: &ModelSpec,
    covariate_rows: &[Vec<f64>],
    s_grid: &[f64],
) -> Result<CepCurve, ModelError> {
    if spec.n_covariates() == 0 {
        let line = gamma_from_marginal(spec)?;
        return Ok(CepCurve::from_line(&line, s_grid.to_vec()));
    }
    if covariate_rows.is_empty() {
        return Err(ModelError::Invalid("empty covariate sample".into()));
    }
    let gamma1 = gamma_conditional(spec, &vec![0.0; spec.n_covariates()])?.gamma1;
    let mut expected = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let mut num = 0.0;
        let mut den = 0.0;
        for x in covariate_rows {
            let w = normal_pdf(s, spec.mean.s1.value_at(x), spec.sds.s1);
            let [mu_s1, mu_t0, mu_t1] = spec.mean.means_at(x);
            num += w * ((mu_t1 - mu_t0) - gamma1 * mu_s1);
            den += w;
        }
        if !(den > 1e-300) || !num.is_finite() {
            return Err(ModelError::QuadratureFailure(s));
        }
        expected.push(num / den + gamma1 * s);
    }
    Ok(CepCurve {
        lower: expected.clone(),
        upper: expected.clone(),
        expected_diff: expected,
        s_grid: s_grid.to_vec(),
        conditioning: GammaScope::Marginal,
    })
}

/// Estimated treatment effect on the observed endpoint under one of the
/// four designs (the coefficient on the arm indicator).
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentEffect {
    pub design: Design,
    pub beta: f64,
    pub std_error: f64,
}

pub fn treatment_effect(data: &Dataset, design: Design) -> Result<TreatmentEffect, ModelError> {
    let baseline = match design.endpoint() {
        EndpointMode::Original => None,
        EndpointMode::DiffFromBaseline => {
            Some(data.baseline_col.ok_or(ModelError::MissingBaseline)?)
        }
    };
    let mut y = Vec::with_capacity(data.records.len());
    let mut z_col = Vec::with_capacity(data.records.len());
    let mut x_cols: Vec<Vec<f64>> = vec![Vec::new(); data.covariate_names.len()];
    for rec in &data.records {
        let t = if rec.z == 1 { rec.t1 } else { rec.t0 };
        let Some(mut t) = t else { continue };
        if let Some(col) = baseline {
            t -= rec.x[col];
        }
        y.push(t);
        z_col.push(rec.z as f64);
        for (j, v) in rec.x.iter().enumerate() {
            x_cols[j].push(*v);
        }
    }
    let mut cols = vec![z_col];
    if design.is_conditional() {
        cols.extend(x_cols);
    }
    let fit = regress::ols_with_intercept(&cols, &y)?;
    Ok(TreatmentEffect {
        design,
        beta: fit.coefs[1],
        std_error: fit.std_errors[1],
    })
}
