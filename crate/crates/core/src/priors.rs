//! Prior library for the correlation, standard-deviation and mean
//! parameters. Correlation priors matter most here: two of the three
//! outcome correlations are never informed by the observed data, so their
//! posteriors are driven entirely by these choices.

use rand::Rng;
use rand_distr::Distribution;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PriorError {
    #[error("invalid prior parameters: {0}")]
    Invalid(String),
    #[error("point-mass priors are only supported for the nonidentified correlations (theta_t, theta10)")]
    PointMassTarget,
}

/// A univariate prior.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorKind {
    /// Flat on the open interval (lo, hi).
    UniformInterval { lo: f64, hi: f64 },
    /// Beta(a, b) linearly rescaled from (0, 1) to (lo, hi).
    ScaledTruncatedBeta { a: f64, b: f64, lo: f64, hi: f64 },
    /// Degenerate prior fixing the parameter, for sensitivity analyses.
    PointMass { value: f64 },
    /// Wide normal, used for mean coefficients.
    VagueNormal { mean: f64, sd: f64 },
}

impl PriorKind {
    pub fn validate(&self) -> Result<(), PriorError> {
        match *self {
            PriorKind::UniformInterval { lo, hi } | PriorKind::ScaledTruncatedBeta { lo, hi, .. }
                if !(lo < hi) =>
            {
                Err(PriorError::Invalid(format!("lo {lo} must be < hi {hi}")))
            }
            PriorKind::ScaledTruncatedBeta { a, b, .. } if !(a > 0.0 && b > 0.0) => Err(
                PriorError::Invalid(format!("beta shapes must be positive, got ({a}, {b})")),
            ),
            PriorKind::VagueNormal { sd, .. } if !(sd > 0.0) => {
                Err(PriorError::Invalid(format!("normal sd must be positive, got {sd}")))
            }
            _ => Ok(()),
        }
    }

    /// Log density up to an additive constant; `-inf` outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            PriorKind::UniformInterval { lo, hi } => {
                if x > lo && x < hi {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            PriorKind::ScaledTruncatedBeta { a, b, lo, hi } => {
                if x <= lo || x >= hi {
                    return f64::NEG_INFINITY;
                }
                let u = (x - lo) / (hi - lo);
                (a - 1.0) * u.ln() + (b - 1.0) * (1.0 - u).ln()
            }
            PriorKind::PointMass { value } => {
                if x == value {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            PriorKind::VagueNormal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z
            }
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            PriorKind::UniformInterval { lo, hi } => rng.gen_range(lo..hi),
            PriorKind::ScaledTruncatedBeta { a, b, lo, hi } => {
                let beta = rand_distr::Beta::new(a, b).expect("validated beta shapes");
                lo + (hi - lo) * beta.sample(rng)
            }
            PriorKind::PointMass { value } => value,
            PriorKind::VagueNormal { mean, sd } => {
                let normal = rand_distr::Normal::new(mean, sd).expect("validated normal sd");
                normal.sample(rng)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            PriorKind::UniformInterval { lo, hi } => 0.5 * (lo + hi),
            PriorKind::ScaledTruncatedBeta { a, b, lo, hi } => lo + (hi - lo) * a / (a + b),
            PriorKind::PointMass { value } => value,
            PriorKind::VagueNormal { mean, .. } => mean,
        }
    }

    /// Support as a closed interval for grid evaluation; half-infinite
    /// supports are clipped by the caller.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            PriorKind::UniformInterval { lo, hi }
            | PriorKind::ScaledTruncatedBeta { lo, hi, .. } => (lo, hi),
            PriorKind::PointMass { value } => (value, value),
            PriorKind::VagueNormal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

/// Which model parameter a prior applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamTarget {
    Theta10,
    Theta11,
    ThetaT,
    SdS1,
    SdT0,
    SdT1,
    MeanCoefs,
}

/// One prior assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub kind: PriorKind,
    pub target: ParamTarget,
}

/// Complete prior configuration for a fit. Standard deviations default to
/// a flat prior over the sampling support derived from the data; mean
/// coefficients default to Normal(0, 100^2).
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSet {
    pub theta10: PriorKind,
    pub theta11: PriorKind,
    pub theta_t: PriorKind,
    /// Optional explicit priors for the three standard deviations; `None`
    /// means flat over the griddy support.
    pub sd_s1: Option<PriorKind>,
    pub sd_t0: Option<PriorKind>,
    pub sd_t1: Option<PriorKind>,
    pub mean_coefs: PriorKind,
}

impl PriorSet {
    fn base() -> Self {
        PriorSet {
            theta10: PriorKind::UniformInterval { lo: -1.0, hi: 1.0 },
            theta11: PriorKind::UniformInterval { lo: -1.0, hi: 1.0 },
            theta_t: PriorKind::UniformInterval { lo: -1.0, hi: 1.0 },
            sd_s1: None,
            sd_t0: None,
            sd_t1: None,
            mean_coefs: PriorKind::VagueNormal { mean: 0.0, sd: 100.0 },
        }
    }

    /// Default configuration when the conditional-independence constraint
    /// is assumed: theta10 is derived, theta_t is Uniform(-1, 1).
    pub fn default_ci() -> Self {
        Self::base()
    }

    /// Default configuration without the constraint: the T(0)-T(1)
    /// correlation gets the scaled Beta(5, 6) prior on (-0.4, 1) and the
    /// S(1)-T(0) correlation a Uniform(-1, 1) prior.
    pub fn default_no_ci() -> Self {
        PriorSet {
            theta_t: scaled_beta_default(),
            ..Self::base()
        }
    }

    pub fn with_theta_t(mut self, kind: PriorKind) -> Self {
        self.theta_t = kind;
        self
    }

    pub fn with_theta10(mut self, kind: PriorKind) -> Self {
        self.theta10 = kind;
        self
    }

    pub fn with_theta11(mut self, kind: PriorKind) -> Self {
        self.theta11 = kind;
        self
    }

    /// Builds a set from explicit assignments on top of the CI or no-CI
    /// defaults. Point masses are legal only for `theta_t` and `theta10`.
    pub fn from_specs(specs: &[PriorSpec], ci: bool) -> Result<Self, PriorError> {
        let mut set = if ci { Self::default_ci() } else { Self::default_no_ci() };
        for spec in specs {
            spec.kind.validate()?;
            if matches!(spec.kind, PriorKind::PointMass { .. })
                && !matches!(spec.target, ParamTarget::ThetaT | ParamTarget::Theta10)
            {
                return Err(PriorError::PointMassTarget);
            }
            match spec.target {
                ParamTarget::Theta10 => set.theta10 = spec.kind.clone(),
                ParamTarget::Theta11 => set.theta11 = spec.kind.clone(),
                ParamTarget::ThetaT => set.theta_t = spec.kind.clone(),
                ParamTarget::SdS1 => set.sd_s1 = Some(spec.kind.clone()),
                ParamTarget::SdT0 => set.sd_t0 = Some(spec.kind.clone()),
                ParamTarget::SdT1 => set.sd_t1 = Some(spec.kind.clone()),
                ParamTarget::MeanCoefs => set.mean_coefs = spec.kind.clone(),
            }
        }
        Ok(set)
    }
}

/// The scaled truncated Beta(5, 6) prior on (-0.4, 1): mean about 0.236.
pub fn scaled_beta_default() -> PriorKind {
    PriorKind::ScaledTruncatedBeta { a: 5.0, b: 6.0, lo: -0.4, hi: 1.0 }
}
