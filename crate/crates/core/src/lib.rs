//! Bayesian validation of principal surrogate endpoints when the biomarker
//! is identically zero under the control arm.
//!
//! The library models the joint distribution of a treated-arm surrogate
//! `S(1)` and the two true-outcome potential values `T(0)`, `T(1)` as
//! (conditionally) Gaussian, optionally given baseline covariates. Surrogate
//! quality is summarized by the line `E(T(1)-T(0) | S(1)=s) = gamma0 +
//! gamma1*s`: the surrogate is declared valid when `gamma0` is compatible
//! with zero and `gamma1` is not.
//!
//! Two of the three outcome correlations are not identified from a
//! parallel-arm trial, so estimation combines proper priors, an optional
//! conditional-independence constraint (`S(1) ⊥ T(0) | T(1)`, i.e.
//! `theta10 = thetaT * theta11`), and either a full imputation MCMC or a
//! cheaper observed-data algorithm that draws nonidentified correlations
//! from their priors.
//!
//! Module map:
//! - [`mvn`]: small dense Gaussian machinery (Cholesky, conditionals,
//!   positive-definiteness bounds for 3x3 correlation matrices).
//! - [`model`]: analysis designs, endpoint transforms, the
//!   conditional-independence constraint and the gamma/CEP metrics.
//! - [`priors`]: the prior library (uniform, scaled truncated beta, point
//!   mass, vague normal).
//! - [`data`]: trial records and the delimited on-disk format.
//! - [`samplers`]: griddy Gibbs scalar draws, the imputation and
//!   observed-data MCMC algorithms, sensitivity scans and convergence
//!   diagnostics.
//! - [`sim`]: benchmark data generators, the complete-data oracle and the
//!   replication harness.

// Negated comparisons like `!(x > 0.0)` are used on purpose: they also
// catch NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod model;
pub mod mvn;
pub mod priors;
pub mod quad;
pub mod regress;
pub mod samplers;
pub mod sim;
pub mod stats;

pub use data::{Dataset, TrialRecord};
pub use model::{
    CepCurve, CorrelationState, CovariateModel, Design, EndpointMode, GammaScope, MeanCoefs,
    MeanStructure, ModelSpec, ValidationMetrics,
};
pub use mvn::GaussianJoint;
pub use priors::{ParamTarget, PriorKind, PriorSet, PriorSpec};
pub use samplers::{
    convergence_report, run_imputation_mcmc, run_observed_data_mcmc, sensitivity_scan,
    ChainConfig, GridSpec, PosteriorDraws, SamplerError,
};
pub use sim::{ReplicationSummary, SimSetting};
