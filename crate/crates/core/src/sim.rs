//! Simulation lab: benchmark data generators, the complete-counterfactual
//! oracle, and the replication harness that produces bias / average
//! posterior SD / estimate SD / coverage summaries.
//!
//! Five built-in Gaussian benchmark settings (A-E) share the conditional
//! model scale: `X` is Normal(1, 0.25) in A-D and Bernoulli(0.5) in E, and
//! the generator enforces the conditional-independence constraint exactly
//! on that scale (`theta10` is always the product `theta_t * theta11`; the
//! rounded display values kept with each preset are reference numbers
//! only). A muscular-dystrophy-style scenario adds a quadratic age effect
//! and a baseline functional score.
//!
//! Every generator is a pure function of `(setting, n, seed)`.

use crate::data::{DataError, Dataset, TrialRecord};
use crate::model::{
    self, CorrelationState, CovariateModel, Design, MeanCoefs, MeanStructure, ModelError,
    ModelSpec, OutcomeSds,
};
use crate::mvn;
use crate::priors::PriorSet;
use crate::regress::{self, RegressError};
use crate::samplers::{
    run_imputation_mcmc, run_observed_data_mcmc, ChainConfig, PosteriorDraws, SamplerError,
};
use crate::stats;
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("sample size must be even (half per arm), got {0}")]
    OddSampleSize(usize),
    #[error("incomplete scenario configuration: {0}")]
    IncompleteConfig(String),
    #[error("unknown setting '{0}'")]
    UnknownSetting(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("all {0} replications failed")]
    AllReplicationsFailed(usize),
}

/// Outcome noise family around the Gaussian conditional means. Non-normal
/// errors are standardized componentwise and mixed through the Cholesky
/// factor, so the first two moments match the Gaussian target exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFamily {
    Gaussian,
    StudentT { df: f64 },
    Gamma { shape: f64 },
}

impl NoiseFamily {
    fn draw_standardized(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            NoiseFamily::Gaussian => rand_distr::StandardNormal.sample(rng),
            NoiseFamily::StudentT { df } => {
                let t: f64 = rand_distr::StudentT::new(df).expect("df > 2").sample(rng);
                t * ((df - 2.0) / df).sqrt()
            }
            NoiseFamily::Gamma { shape } => {
                let g: f64 = rand_distr::Gamma::new(shape, 1.0).expect("shape > 0").sample(rng);
                (g - shape) / shape.sqrt()
            }
        }
    }
}

/// Covariate generation recipe.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateGen {
    /// No covariates at all.
    None,
    /// One column, Normal(mean, sd^2).
    Normal { mean: f64, sd: f64 },
    /// One column, Bernoulli(p) in {0, 1}.
    Bernoulli { p: f64 },
    /// Three columns `[age, age^2, baseline]`: age Uniform(lo, hi) with a
    /// derived quadratic column, baseline Normal(mean, sd^2).
    AgeQuadPlusBaseline { age_lo: f64, age_hi: f64, base_mean: f64, base_sd: f64 },
}

impl CovariateGen {
    pub fn names(&self) -> Vec<String> {
        match self {
            CovariateGen::None => vec![],
            CovariateGen::Normal { .. } | CovariateGen::Bernoulli { .. } => vec!["x".into()],
            CovariateGen::AgeQuadPlusBaseline { .. } => {
                vec!["x_age".into(), "x_age2".into(), "x_nsaa0".into()]
            }
        }
    }

    /// Index of the pre-treatment outcome measurement among the columns.
    /// A binary covariate cannot serve as a baseline for a continuous
    /// endpoint difference.
    pub fn baseline_col(&self) -> Option<usize> {
        match self {
            CovariateGen::None | CovariateGen::Bernoulli { .. } => None,
            CovariateGen::Normal { .. } => Some(0),
            CovariateGen::AgeQuadPlusBaseline { .. } => Some(2),
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> Vec<f64> {
        match *self {
            CovariateGen::None => vec![],
            CovariateGen::Normal { mean, sd } => {
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                vec![mean + sd * z]
            }
            CovariateGen::Bernoulli { p } => {
                vec![if rng.gen::<f64>() < p { 1.0 } else { 0.0 }]
            }
            CovariateGen::AgeQuadPlusBaseline { age_lo, age_hi, base_mean, base_sd } => {
                let age = rng.gen_range(age_lo..age_hi);
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                vec![age, age * age, base_mean + base_sd * z]
            }
        }
    }

    /// The matching scalar covariate model, when one exists.
    pub fn model(&self) -> CovariateModel {
        match *self {
            CovariateGen::Normal { mean, sd } => CovariateModel::Normal { mean, sd },
            CovariateGen::Bernoulli { p } => CovariateModel::Bernoulli { p },
            _ => CovariateModel::None,
        }
    }
}

/// A data-generating scenario: the conditional outcome model plus the
/// covariate recipe and noise family.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSetting {
    pub name: String,
    /// Mean coefficients per outcome over the covariate columns.
    pub mean: MeanStructure,
    pub sds: OutcomeSds,
    /// Generating correlations; presets enforce conditional independence
    /// exactly on this (original endpoint, conditional) scale.
    pub corr: CorrelationState,
    pub covariates: CovariateGen,
    pub noise: NoiseFamily,
    /// Rounded display value of the derived `theta10` product, kept with
    /// the preset for reference output; generation never uses it.
    pub reference_theta10: Option<f64>,
    /// Reference gamma values associated with the preset, by estimand
    /// column name.
    pub reference_gammas: Vec<(String, f64)>,
}

impl SimSetting {
    pub fn with_noise(mut self, noise: NoiseFamily) -> Self {
        self.noise = noise;
        self
    }

    /// The generating model as a conditional specification.
    pub fn generating_spec(&self) -> ModelSpec {
        let design = if self.mean.s1.slopes.is_empty() {
            Design::OriginalMarginal
        } else {
            Design::OriginalConditional
        };
        ModelSpec {
            design,
            mean: self.mean.clone(),
            sds: self.sds,
            corr: self.corr,
            covariate: self.covariates.model(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let k = self.covariates.names().len();
        if self.mean.s1.slopes.len() != k
            || self.mean.t0.slopes.len() != k
            || self.mean.t1.slopes.len() != k
        {
            return Err(SimError::IncompleteConfig(format!(
                "mean structure must have {k} slopes per outcome"
            )));
        }
        for sd in self.sds.as_array() {
            if !(sd > 0.0) {
                return Err(SimError::IncompleteConfig(format!("sd {sd} not positive")));
            }
        }
        if let NoiseFamily::StudentT { df } = self.noise {
            if !(df > 2.0) {
                return Err(SimError::IncompleteConfig(
                    "t noise needs df > 2 for a finite variance".into(),
                ));
            }
        }
        if let NoiseFamily::Gamma { shape } = self.noise {
            if !(shape > 0.0) {
                return Err(SimError::IncompleteConfig("gamma noise needs shape > 0".into()));
            }
        }
        self.corr
            .validate()
            .map_err(|e| SimError::IncompleteConfig(e.to_string()))
    }
}

fn preset_gaussian(
    name: &str,
    omegas: [f64; 6],
    theta11: f64,
    theta_t: f64,
    reference_theta10: f64,
    covariates: CovariateGen,
    reference_gammas: Vec<(String, f64)>,
) -> SimSetting {
    SimSetting {
        name: name.to_string(),
        mean: MeanStructure {
            s1: MeanCoefs { intercept: omegas[0], slopes: vec![omegas[1]] },
            t0: MeanCoefs { intercept: omegas[2], slopes: vec![omegas[3]] },
            t1: MeanCoefs { intercept: omegas[4], slopes: vec![omegas[5]] },
        },
        sds: OutcomeSds { s1: 1.0, t0: 1.0, t1: 1.0 },
        corr: CorrelationState::ConditionalIndependence { theta11, theta_t },
        covariates,
        noise: NoiseFamily::Gaussian,
        reference_theta10: Some(reference_theta10),
        reference_gammas,
    }
}

/// The five built-in benchmark settings plus the muscular-dystrophy-style
/// scenario under its default configuration.
pub fn preset(name: &str) -> Result<SimSetting, SimError> {
    let normal_x = CovariateGen::Normal { mean: 1.0, sd: 0.5 };
    let marg = |g0: f64, g1: f64| vec![("gamma0".into(), g0), ("gamma1".into(), g1)];
    match name.to_ascii_uppercase().as_str() {
        "A" => Ok(preset_gaussian(
            "A",
            [2.0, 0.0, 3.0, 1.0, 4.1, 1.0],
            0.7,
            0.21,
            0.15,
            normal_x,
            marg(0.0, 0.55),
        )),
        "B" => Ok(preset_gaussian(
            "B",
            [2.0, 0.0, 3.0, 0.0, 4.1, 0.0],
            0.7,
            0.21,
            0.15,
            normal_x,
            marg(0.0, 0.55),
        )),
        "C" => Ok(preset_gaussian(
            "C",
            [2.0, 0.0, 3.0, 1.0, 4.1, 1.0],
            0.7,
            0.21,
            0.15,
            normal_x,
            marg(-1.00, 0.55),
        )),
        "D" => Ok(preset_gaussian(
            "D",
            [2.0, 0.0, 3.0, 3.0, 4.1, 1.0],
            0.3,
            0.26,
            0.08,
            normal_x,
            marg(-1.35, 0.22),
        )),
        "E" => {
            let mut gammas = marg(1.31, 0.58);
            gammas.push(("gamma0[x=0]".into(), 0.0));
            gammas.push(("gamma0[x=1]".into(), 2.75));
            gammas.push(("gamma0_marg".into(), 1.31));
            gammas.push(("gamma1_marg".into(), 0.58));
            Ok(preset_gaussian(
                "E",
                [2.0, 0.0, 3.0, -0.75, 4.1, 2.0],
                0.7,
                0.21,
                0.15,
                CovariateGen::Bernoulli { p: 0.5 },
                gammas,
            ))
        }
        "DMD" => dmd_scenario(&DmdConfig::default()),
        other => Err(SimError::UnknownSetting(other.to_string())),
    }
}

pub fn preset_names() -> &'static [&'static str] {
    &["A", "B", "C", "D", "E", "DMD"]
}

/// Generator coefficients for the muscular-dystrophy-style scenario.
/// Covariate columns are `[age, age^2, baseline score]`. All values are
/// artifact-chosen defaults, not published quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct DmdConfig {
    pub age_lo: f64,
    pub age_hi: f64,
    pub base_mean: f64,
    pub base_sd: f64,
    pub s1: MeanCoefs,
    pub t0: MeanCoefs,
    pub t1: MeanCoefs,
    pub sds: OutcomeSds,
    pub theta11: f64,
    pub theta_t: f64,
}

impl Default for DmdConfig {
    fn default() -> Self {
        // Natural-history change from baseline g0(age) = -5 + 3.5 age -
        // 0.5 age^2 (gains at 4, decline from 6 on); treatment benefit
        // delta(age) = 15.6 - 2.85 age + 0.05 age^2, tuned so the expected
        // benefit over ages 4-8 is small and the surrogate is exactly
        // calibrated at age 4 (gamma0(4) = 0) and off at 6 and older.
        DmdConfig {
            age_lo: 4.0,
            age_hi: 8.0,
            base_mean: 24.0,
            base_sd: 3.0,
            s1: MeanCoefs { intercept: 20.0, slopes: vec![0.0, 0.0, 0.0] },
            t0: MeanCoefs { intercept: -5.0, slopes: vec![3.5, -0.5, 1.0] },
            t1: MeanCoefs { intercept: 10.6, slopes: vec![0.65, -0.45, 1.0] },
            sds: OutcomeSds { s1: 6.0, t0: 2.5, t1: 2.5 },
            theta11: 0.8,
            theta_t: 0.25,
        }
    }
}

pub fn dmd_scenario(config: &DmdConfig) -> Result<SimSetting, SimError> {
    for (name, coefs) in [("s1", &config.s1), ("t0", &config.t0), ("t1", &config.t1)] {
        if coefs.slopes.len() != 3 {
            return Err(SimError::IncompleteConfig(format!(
                "{name} needs slopes for [age, age^2, baseline], got {}",
                coefs.slopes.len()
            )));
        }
    }
    if !(config.age_hi > config.age_lo) {
        return Err(SimError::IncompleteConfig("empty age range".into()));
    }
    if !(config.base_sd > 0.0) {
        return Err(SimError::IncompleteConfig("baseline sd must be positive".into()));
    }
    let setting = SimSetting {
        name: "DMD".to_string(),
        mean: MeanStructure {
            s1: config.s1.clone(),
            t0: config.t0.clone(),
            t1: config.t1.clone(),
        },
        sds: config.sds,
        corr: CorrelationState::ConditionalIndependence {
            theta11: config.theta11,
            theta_t: config.theta_t,
        },
        covariates: CovariateGen::AgeQuadPlusBaseline {
            age_lo: config.age_lo,
            age_hi: config.age_hi,
            base_mean: config.base_mean,
            base_sd: config.base_sd,
        },
        noise: NoiseFamily::Gaussian,
        reference_theta10: None,
        reference_gammas: Vec::new(),
    };
    setting.validate()?;
    Ok(setting)
}

/// One subject with every potential outcome filled in; oracle use only.
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteRecord {
    pub id: u64,
    pub z: u8,
    pub x: Vec<f64>,
    pub s1: f64,
    pub t0: f64,
    pub t1: f64,
}

/// The full counterfactual table behind one generated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteDataset {
    pub covariate_names: Vec<String>,
    pub baseline_col: Option<usize>,
    pub records: Vec<CompleteRecord>,
}

impl CompleteDataset {
    /// The masked trial view: each record keeps only its own arm's
    /// observed slots. Nothing else ever leaves this table.
    pub fn mask(&self) -> Dataset {
        let records = self
            .records
            .iter()
            .map(|r| {
                if r.z == 0 {
                    TrialRecord { id: r.id, z: 0, x: r.x.clone(), s1: None, t0: Some(r.t0), t1: None }
                } else {
                    TrialRecord {
                        id: r.id,
                        z: 1,
                        x: r.x.clone(),
                        s1: Some(r.s1),
                        t0: None,
                        t1: Some(r.t1),
                    }
                }
            })
            .collect();
        Dataset::new(self.covariate_names.clone(), self.baseline_col, records)
            .expect("masked view is arm-consistent by construction")
    }

    pub fn write_to(&self, w: &mut impl std::io::Write) -> Result<(), DataError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["id".to_string(), "z".to_string()];
        header.extend(self.covariate_names.iter().cloned());
        header.extend(["s1", "t0", "t1"].map(String::from));
        out.write_record(&header)?;
        for rec in &self.records {
            let mut row = vec![rec.id.to_string(), rec.z.to_string()];
            row.extend(rec.x.iter().map(|v| v.to_string()));
            row.extend([rec.s1, rec.t0, rec.t1].map(|v| v.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Draws a complete counterfactual dataset of size `n` (first half
/// control, second half treated) from the setting's conditional model.
pub fn generate(setting: &SimSetting, n: usize, seed: u64) -> Result<CompleteDataset, SimError> {
    if !n.is_multiple_of(2) {
        return Err(SimError::OddSampleSize(n));
    }
    setting.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = {
        let mut m = setting.corr.matrix();
        let d = setting.sds.as_array();
        for a in 0..3 {
            for b in 0..3 {
                m[(a, b)] *= d[a] * d[b];
            }
        }
        m
    };
    let chol = mvn::cholesky(&sigma).map_err(ModelError::from)?;

    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let x = setting.covariates.draw(&mut rng);
        let mu = setting.mean.means_at(&x);
        let u = DVector::from_fn(3, |_, _| setting.noise.draw_standardized(&mut rng));
        let e = &chol * u;
        records.push(CompleteRecord {
            id: (i + 1) as u64,
            z: if i < n / 2 { 0 } else { 1 },
            x,
            s1: mu[0] + e[0],
            t0: mu[1] + e[1],
            t1: mu[2] + e[2],
        });
    }
    Ok(CompleteDataset {
        covariate_names: setting.covariates.names(),
        baseline_col: setting.covariates.baseline_col(),
        records,
    })
}

/// Complete-data least squares of the individual effects `T(1) - T(0)` on
/// `S(1)` (plus the covariates for conditional designs). This is the
/// brute-force reference for every derived gamma value: with all
/// counterfactuals visible the regression estimates the CEP line directly.
#[derive(Debug, Clone)]
pub struct OracleFit {
    pub design: Design,
    pub intercept: f64,
    pub gamma1: f64,
    pub x_coefs: Vec<f64>,
    pub se_intercept: f64,
    pub se_gamma1: f64,
    pub se_x: Vec<f64>,
}

impl OracleFit {
    pub fn gamma0_at(&self, x: &[f64]) -> f64 {
        self.intercept + self.x_coefs.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

pub fn oracle_fit(complete: &CompleteDataset, design: Design) -> Result<OracleFit, SimError> {
    let baseline = match design.endpoint() {
        model::EndpointMode::Original => None,
        model::EndpointMode::DiffFromBaseline => Some(
            complete
                .baseline_col
                .ok_or(ModelError::MissingBaseline)?,
        ),
    };
    let n = complete.records.len();
    let k = complete.covariate_names.len();
    let mut y = Vec::with_capacity(n);
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n)];
    if design.is_conditional() {
        cols.extend(std::iter::repeat_with(|| Vec::with_capacity(n)).take(k));
    }
    for rec in &complete.records {
        // T_D(1) - T_D(0) = T(1) - T(0): the baseline cancels within
        // subject, so the difference endpoint changes nothing here.
        let _ = baseline;
        y.push(rec.t1 - rec.t0);
        cols[0].push(rec.s1);
        if design.is_conditional() {
            for j in 0..k {
                cols[1 + j].push(rec.x[j]);
            }
        }
    }
    let fit = regress::ols_with_intercept(&cols, &y)?;
    Ok(OracleFit {
        design,
        intercept: fit.coefs[0],
        gamma1: fit.coefs[1],
        x_coefs: fit.coefs[2..].to_vec(),
        se_intercept: fit.std_errors[0],
        se_gamma1: fit.std_errors[1],
        se_x: fit.std_errors[2..].to_vec(),
    })
}

/// Which posterior quantities a replication study tracks.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimandSet {
    /// Marginal gamma pair (direct for marginal designs, marginalized for
    /// conditional ones).
    Marginal,
    /// Conditional gamma0 at the given covariate values plus the common
    /// slope.
    ConditionalAt(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Observed,
    Imputation,
}

impl Algorithm {
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::Observed => "observed",
            Algorithm::Imputation => "imputation",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplicationRequest {
    pub design: Design,
    pub ci: bool,
    pub algorithm: Algorithm,
    pub priors: PriorSet,
    pub cfg: ChainConfig,
    pub estimands: EstimandSet,
    /// Also report bias/SE/SD divided by the across-replication SD of the
    /// complete-data oracle estimates.
    pub scale_by_oracle: bool,
}

/// Per-replication posterior summary of one estimand.
#[derive(Debug, Clone)]
pub struct EstimandDraw {
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

/// One replication's results: posterior summaries per estimand plus the
/// complete-data oracle point estimates for the same estimands.
#[derive(Debug, Clone)]
pub struct RepResult {
    pub rep: usize,
    pub estimands: Vec<EstimandDraw>,
    pub oracle: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EstimandSummary {
    pub name: String,
    pub truth: f64,
    /// Rounded published reference value for this estimand, when the
    /// preset ships one.
    pub reference: Option<f64>,
    pub mean_estimate: f64,
    pub bias: f64,
    pub avg_posterior_sd: f64,
    pub sd_estimates: Option<f64>,
    pub coverage_truth: f64,
    pub covers_zero: f64,
    pub oracle_sd: Option<f64>,
    pub scaled_bias: Option<f64>,
    pub scaled_se: Option<f64>,
    pub scaled_sd: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplicationSummary {
    pub setting: String,
    pub design: Design,
    pub ci: bool,
    pub algorithm: Algorithm,
    pub n: usize,
    pub n_reps: usize,
    pub n_failed: usize,
    pub estimands: Vec<EstimandSummary>,
}

/// SplitMix64 step, used to derive independent per-replication seeds from
/// one root seed.
pub fn derive_seed(root: u64, index: u64) -> u64 {
    let mut z = root
        .wrapping_add(0x9E3779B97F4A7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Estimand column names for a request.
fn estimand_names(setting: &SimSetting, req: &ReplicationRequest) -> Vec<String> {
    match &req.estimands {
        EstimandSet::Marginal => {
            if req.design.is_conditional() {
                vec!["gamma0_marg".into(), "gamma1_marg".into()]
            } else {
                vec!["gamma0".into(), "gamma1".into()]
            }
        }
        EstimandSet::ConditionalAt(values) => {
            let names = setting.covariates.names();
            let mut out: Vec<String> = values
                .iter()
                .map(|x| crate::samplers::gamma_label_for(&names, x))
                .collect();
            out.push("gamma1".into());
            out
        }
    }
}

/// Oracle point estimates matching `estimand_names` order.
fn oracle_estimates(
    complete: &CompleteDataset,
    req: &ReplicationRequest,
) -> Result<Vec<f64>, SimError> {
    match &req.estimands {
        EstimandSet::Marginal => {
            let marginal_design = match req.design.endpoint() {
                model::EndpointMode::Original => Design::OriginalMarginal,
                model::EndpointMode::DiffFromBaseline => Design::DiffMarginal,
            };
            let fit = oracle_fit(complete, marginal_design)?;
            Ok(vec![fit.intercept, fit.gamma1])
        }
        EstimandSet::ConditionalAt(values) => {
            let conditional_design = match req.design.endpoint() {
                model::EndpointMode::Original => Design::OriginalConditional,
                model::EndpointMode::DiffFromBaseline => Design::DiffConditional,
            };
            let fit = oracle_fit(complete, conditional_design)?;
            let mut out: Vec<f64> = values.iter().map(|x| fit.gamma0_at(x)).collect();
            out.push(fit.gamma1);
            Ok(out)
        }
    }
}

/// Large-sample oracle truth for every estimand (one million subjects,
/// seed derived from the chain seed).
fn oracle_truths(setting: &SimSetting, req: &ReplicationRequest) -> Result<Vec<f64>, SimError> {
    let complete = generate(setting, 1_000_000, derive_seed(req.cfg.seed, u64::MAX - 7))?;
    oracle_estimates(&complete, req)
}

fn run_one_replication(
    setting: &SimSetting,
    n: usize,
    rep: usize,
    req: &ReplicationRequest,
    names: &[String],
) -> Result<RepResult, SimError> {
    let data_seed = derive_seed(req.cfg.seed, 2 * rep as u64);
    let chain_seed = derive_seed(req.cfg.seed, 2 * rep as u64 + 1);
    let complete = generate(setting, n, data_seed)?;
    let masked = complete.mask();

    let mut cfg = req.cfg.clone();
    cfg.seed = chain_seed;
    match &req.estimands {
        EstimandSet::Marginal => {
            cfg.marginal_gammas = true;
        }
        EstimandSet::ConditionalAt(values) => {
            cfg.gamma_at = values.clone();
            cfg.marginal_gammas = false;
        }
    }
    let template = ModelSpec::template_from_data(&masked, req.design, req.ci);
    let draws = match req.algorithm {
        Algorithm::Observed => run_observed_data_mcmc(&masked, &template, &req.priors, &cfg)?,
        Algorithm::Imputation => run_imputation_mcmc(&masked, &template, &req.priors, &cfg)?,
    };

    let mut estimands = Vec::with_capacity(names.len());
    for name in names {
        let col = draws.column(name).ok_or_else(|| {
            SimError::IncompleteConfig(format!("draws are missing column '{name}'"))
        })?;
        let (lo, hi) = stats::central_interval_95(&col);
        estimands.push(EstimandDraw {
            mean: stats::mean(&col),
            sd: stats::sd(&col),
            lo,
            hi,
        });
    }
    let oracle = oracle_estimates(&complete, req)?;
    Ok(RepResult { rep, estimands, oracle })
}

/// Estimand names plus per-replication outcomes, in replication order.
pub type ReplicationRuns = (Vec<String>, Vec<Result<RepResult, String>>);

/// Independent replications with derived seeds, run in parallel and
/// aggregated in replication order.
pub fn run_replication_set(
    setting: &SimSetting,
    n: usize,
    n_reps: usize,
    req: &ReplicationRequest,
) -> Result<ReplicationRuns, SimError> {
    let names = estimand_names(setting, req);
    let results: Vec<Result<RepResult, String>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            run_one_replication(setting, n, rep, req, &names).map_err(|e| e.to_string())
        })
        .collect();
    Ok((names, results))
}

pub fn run_replications(
    setting: &SimSetting,
    n: usize,
    n_reps: usize,
    req: &ReplicationRequest,
) -> Result<ReplicationSummary, SimError> {
    let truths = oracle_truths(setting, req)?;
    let (names, results) = run_replication_set(setting, n, n_reps, req)?;
    let ok: Vec<&RepResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let n_failed = n_reps - ok.len();
    if ok.is_empty() {
        return Err(SimError::AllReplicationsFailed(n_reps));
    }

    let mut estimands = Vec::with_capacity(names.len());
    for (idx, name) in names.iter().enumerate() {
        let means: Vec<f64> = ok.iter().map(|r| r.estimands[idx].mean).collect();
        let sds: Vec<f64> = ok.iter().map(|r| r.estimands[idx].sd).collect();
        let truth = truths[idx];
        let coverage_truth = ok
            .iter()
            .filter(|r| r.estimands[idx].lo <= truth && truth <= r.estimands[idx].hi)
            .count() as f64
            / ok.len() as f64;
        let covers_zero = ok
            .iter()
            .filter(|r| r.estimands[idx].lo <= 0.0 && 0.0 <= r.estimands[idx].hi)
            .count() as f64
            / ok.len() as f64;
        let mean_estimate = stats::mean(&means);
        let avg_posterior_sd = stats::mean(&sds);
        let sd_estimates = if ok.len() >= 2 { Some(stats::sd(&means)) } else { None };
        let oracle_col: Vec<f64> = ok.iter().map(|r| r.oracle[idx]).collect();
        let oracle_sd = if req.scale_by_oracle && ok.len() >= 2 {
            Some(stats::sd(&oracle_col))
        } else {
            None
        };
        let bias = mean_estimate - truth;
        let reference = setting
            .reference_gammas
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v);
        estimands.push(EstimandSummary {
            name: name.clone(),
            truth,
            reference,
            mean_estimate,
            bias,
            avg_posterior_sd,
            sd_estimates,
            coverage_truth,
            covers_zero,
            oracle_sd,
            scaled_bias: oracle_sd.map(|s| bias / s),
            scaled_se: oracle_sd.map(|s| avg_posterior_sd / s),
            scaled_sd: oracle_sd.and_then(|s| sd_estimates.map(|e| e / s)),
        });
    }
    Ok(ReplicationSummary {
        setting: setting.name.clone(),
        design: req.design,
        ci: req.ci,
        algorithm: req.algorithm,
        n,
        n_reps,
        n_failed,
        estimands,
    })
}

impl ModelSpec {
    /// Builds a fit template with empirical starting values: observed
    /// means and sds per outcome (unit fallbacks), zero slopes and
    /// midrange correlations.
    pub fn template_from_data(data: &Dataset, design: Design, ci: bool) -> ModelSpec {
        let k = if design.is_conditional() { data.n_covariates() } else { 0 };
        let obs_s1: Vec<f64> = data.arm(1).filter_map(|r| r.s1).collect();
        let obs_t1: Vec<f64> = data.arm(1).filter_map(|r| r.t1).collect();
        let obs_t0: Vec<f64> = data.arm(0).filter_map(|r| r.t0).collect();
        let m = |v: &[f64]| if v.is_empty() { 0.0 } else { stats::mean(v) };
        let s = |v: &[f64]| {
            let sd = stats::sd(v);
            if sd.is_finite() && sd > 1e-3 {
                sd
            } else {
                1.0
            }
        };
        let coefs = |vals: &[f64]| MeanCoefs { intercept: m(vals), slopes: vec![0.0; k] };
        let corr = if ci {
            CorrelationState::ConditionalIndependence { theta11: 0.0, theta_t: 0.0 }
        } else {
            CorrelationState::Free { theta10: 0.0, theta11: 0.0, theta_t: 0.0 }
        };
        ModelSpec {
            design,
            mean: MeanStructure {
                s1: coefs(&obs_s1),
                t0: coefs(&obs_t0),
                t1: coefs(&obs_t1),
            },
            sds: OutcomeSds { s1: s(&obs_s1), t0: s(&obs_t0), t1: s(&obs_t1) },
            corr,
            covariate: CovariateModel::None,
        }
    }
}

/// Returns draws for one simulated dataset fit, a convenience wrapper used
/// by examples and tests.
#[allow(clippy::too_many_arguments)]
pub fn fit_setting(
    setting: &SimSetting,
    n: usize,
    seed: u64,
    design: Design,
    ci: bool,
    algorithm: Algorithm,
    priors: &PriorSet,
    cfg: &ChainConfig,
) -> Result<PosteriorDraws, SimError> {
    let complete = generate(setting, n, seed)?;
    let masked = complete.mask();
    let template = ModelSpec::template_from_data(&masked, design, ci);
    Ok(match algorithm {
        Algorithm::Observed => run_observed_data_mcmc(&masked, &template, priors, cfg)?,
        Algorithm::Imputation => run_imputation_mcmc(&masked, &template, priors, cfg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let setting = preset("A").unwrap();
        let a = generate(&setting, 100, 42).unwrap();
        let b = generate(&setting, 100, 42).unwrap();
        assert_eq!(a, b);
        let c = generate(&setting, 100, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn odd_sample_size_rejected() {
        let setting = preset("A").unwrap();
        assert!(matches!(generate(&setting, 101, 1), Err(SimError::OddSampleSize(101))));
    }

    #[test]
    fn masked_view_never_leaks_counterfactuals() {
        let setting = preset("E").unwrap();
        let complete = generate(&setting, 200, 7).unwrap();
        let masked = complete.mask();
        for rec in &masked.records {
            if rec.z == 0 {
                assert!(rec.s1.is_none() && rec.t1.is_none() && rec.t0.is_some());
            } else {
                assert!(rec.s1.is_some() && rec.t1.is_some() && rec.t0.is_none());
            }
        }
        masked.validate().unwrap();
    }

    #[test]
    fn setting_e_covariate_is_balanced_bernoulli() {
        let setting = preset("E").unwrap();
        let complete = generate(&setting, 10_000, 11).unwrap();
        let freq = complete.records.iter().filter(|r| r.x[0] == 1.0).count() as f64 / 10_000.0;
        assert!((freq - 0.5).abs() < 0.02, "{freq}");
        assert!(complete.records.iter().all(|r| r.x[0] == 0.0 || r.x[0] == 1.0));
    }

    #[test]
    fn setting_a_conditional_residual_correlations() {
        // Empirical partial correlation of S(1), T(0) given X approaches
        // the constrained product (rounds to the displayed 0.15).
        let setting = preset("A").unwrap();
        let complete = generate(&setting, 1_000_000, 5).unwrap();
        // Residualize on x by closed form: the generator's own means.
        let spec = setting.generating_spec();
        let (mut s_ss, mut s_tt, mut s_st) = (0.0, 0.0, 0.0);
        let n = complete.records.len() as f64;
        for rec in &complete.records {
            let mu = spec.mean.means_at(&rec.x);
            let rs = rec.s1 - mu[0];
            let rt = rec.t0 - mu[1];
            s_ss += rs * rs;
            s_tt += rt * rt;
            s_st += rs * rt;
        }
        let corr = s_st / (s_ss.sqrt() * s_tt.sqrt());
        assert!((corr - 0.15).abs() < 0.005, "{corr}");
        let _ = n;
    }

    #[test]
    fn independent_outcomes_when_effects_and_correlations_vanish() {
        let mut setting = preset("B").unwrap();
        setting.corr = CorrelationState::Free { theta10: 0.0, theta11: 0.0, theta_t: 0.0 };
        let n = 40_000;
        let complete = generate(&setting, n, 3).unwrap();
        let s1: Vec<f64> = complete.records.iter().map(|r| r.s1).collect();
        let t0: Vec<f64> = complete.records.iter().map(|r| r.t0).collect();
        let t1: Vec<f64> = complete.records.iter().map(|r| r.t1).collect();
        let corr = |a: &[f64], b: &[f64]| {
            let (ma, mb) = (stats::mean(a), stats::mean(b));
            let num: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
            let da: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>().sqrt();
            let db: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum::<f64>().sqrt();
            num / (da * db)
        };
        let bound = 3.0 / (n as f64).sqrt();
        assert!(corr(&s1, &t0).abs() < bound);
        assert!(corr(&s1, &t1).abs() < bound);
        assert!(corr(&t0, &t1).abs() < bound);
    }

    #[test]
    fn moment_matching_of_misspecified_noise() {
        let base = preset("B").unwrap();
        for noise in [NoiseFamily::StudentT { df: 5.0 }, NoiseFamily::Gamma { shape: 2.0 }] {
            let setting = base.clone().with_noise(noise);
            let n = 400_000;
            let complete = generate(&setting, n, 9).unwrap();
            let s1: Vec<f64> = complete.records.iter().map(|r| r.s1).collect();
            let t1: Vec<f64> = complete.records.iter().map(|r| r.t1).collect();
            let tol = 4.0 / (n as f64).sqrt() * 3.0;
            assert!((stats::mean(&s1) - 2.0).abs() < tol, "{noise:?}");
            assert!((stats::sd(&s1) - 1.0).abs() < tol, "{noise:?}");
            // Cross moment: Cov(S1, T1) = theta11 = 0.7 in setting B.
            let ms = stats::mean(&s1);
            let mt = stats::mean(&t1);
            let cov: f64 = s1
                .iter()
                .zip(&t1)
                .map(|(a, b)| (a - ms) * (b - mt))
                .sum::<f64>()
                / (n as f64 - 1.0);
            assert!((cov - 0.7).abs() < tol * 2.0, "{noise:?}: {cov}");
        }
    }

    #[test]
    fn oracle_recovers_known_line() {
        // T(1) = T(0) exactly: zero effect everywhere, so the fitted line
        // vanishes up to numerical noise.
        let setting = preset("B").unwrap();
        let mut complete = generate(&setting, 10_000, 13).unwrap();
        for rec in &mut complete.records {
            rec.t1 = rec.t0;
        }
        let fit = oracle_fit(&complete, Design::OriginalMarginal).unwrap();
        assert!(fit.intercept.abs() < 1e-10);
        assert!(fit.gamma1.abs() < 1e-10);
    }

    #[test]
    fn derive_seed_spreads() {
        let a = derive_seed(1, 0);
        let b = derive_seed(1, 1);
        let c = derive_seed(2, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn dmd_scenario_shape() {
        let setting = preset("DMD").unwrap();
        let complete = generate(&setting, 1000, 3).unwrap();
        assert_eq!(complete.covariate_names.len(), 3);
        assert_eq!(complete.baseline_col, Some(2));
        for rec in &complete.records {
            assert!(rec.x[0] >= 4.0 && rec.x[0] < 8.0);
            assert!((rec.x[1] - rec.x[0] * rec.x[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn dmd_config_validated() {
        let mut config = DmdConfig::default();
        config.s1.slopes.pop();
        assert!(matches!(dmd_scenario(&config), Err(SimError::IncompleteConfig(_))));
        let mut config = DmdConfig::default();
        config.age_hi = config.age_lo;
        assert!(matches!(dmd_scenario(&config), Err(SimError::IncompleteConfig(_))));
    }

    #[test]
    fn dmd_zero_age_effects_flatten_the_cep() {
        let mut config = DmdConfig::default();
        // Remove every age term from both true-outcome means.
        config.t0.slopes[0] = 0.0;
        config.t0.slopes[1] = 0.0;
        config.t1.slopes[0] = 0.0;
        config.t1.slopes[1] = 0.0;
        let setting = dmd_scenario(&config).unwrap();
        let spec = ModelSpec {
            design: Design::OriginalConditional,
            mean: setting.mean.clone(),
            sds: setting.sds,
            corr: setting.corr,
            covariate: CovariateModel::None,
        };
        let g4 = model::gamma_conditional(&spec, &[4.0, 16.0, 24.0]).unwrap();
        let g7 = model::gamma_conditional(&spec, &[7.0, 49.0, 24.0]).unwrap();
        assert!((g4.gamma0 - g7.gamma0).abs() < 1e-12);
        assert_eq!(g4.gamma1, g7.gamma1);
    }
}
