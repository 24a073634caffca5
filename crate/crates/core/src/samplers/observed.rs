//! Observed-data algorithm: Bayesian fits of the treated-arm bivariate
//! `(S(1), T(1)) | x` model and the control-arm univariate `T(0) | x`
//! model, with the nonidentified correlations drawn directly from their
//! priors. Nothing here ever reads a missing potential-outcome slot.
//!
//! The observed likelihood carries no information on `theta_t` or
//! `theta10`, so drawing them from the prior reproduces their posterior
//! exactly (given independent priors); only `theta11` gets a data-driven
//! conditional. Under the conditional-independence constraint `theta10`
//! is the product `theta_t * theta11`; otherwise a prior draw of
//! `theta10` is accepted only inside the positive-definiteness interval,
//! with rejection and redraw outside it.

use super::common::{
    coef_names, corr_log_likelihood, design_matrix, sd_support_hi, spec_from_state, update_sd,
    GammaRecorder, RegressionBlock,
};
use super::griddy::griddy_gibbs_draw;
use super::{ChainConfig, PosteriorDraws, SamplerError};
use crate::data::Dataset;
use crate::model::{endpoint_transform_dataset, CorrelationState, MeanStructure, ModelSpec};
use crate::mvn;
use crate::priors::{PriorKind, PriorSet};
use crate::stats;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MAX_PD_REJECTIONS: usize = 10_000;

pub fn run_observed_data_mcmc(
    data: &Dataset,
    template: &ModelSpec,
    priors: &PriorSet,
    cfg: &ChainConfig,
) -> Result<PosteriorDraws, SamplerError> {
    cfg.validate()?;
    data.validate()?;
    let design = template.design;
    let ci = template.ci_assumed();
    let data = endpoint_transform_dataset(data, design.endpoint())?;
    let conditional = design.is_conditional();
    let k = if conditional { data.n_covariates() } else { 0 };

    // Treated-arm block over (S(1), T(1)); control-arm block over T(0).
    let treated: Vec<&crate::data::TrialRecord> = data.arm(1).collect();
    let control: Vec<&crate::data::TrialRecord> = data.arm(0).collect();
    let rows1: Vec<&Vec<f64>> = treated.iter().map(|r| &r.x).collect();
    let rows0: Vec<&Vec<f64>> = control.iter().map(|r| &r.x).collect();

    let mut y1 = DMatrix::zeros(treated.len(), 2);
    for (i, rec) in treated.iter().enumerate() {
        y1[(i, 0)] = rec.s1.expect("validated treated record");
        y1[(i, 1)] = rec.t1.expect("validated treated record");
    }
    let mut y0 = DMatrix::zeros(control.len(), 1);
    for (i, rec) in control.iter().enumerate() {
        y0[(i, 0)] = rec.t0.expect("validated control record");
    }

    let obs_s1: Vec<f64> = treated.iter().filter_map(|r| r.s1).collect();
    let obs_t1: Vec<f64> = treated.iter().filter_map(|r| r.t1).collect();
    let obs_t0: Vec<f64> = control.iter().filter_map(|r| r.t0).collect();
    let support_s1 = sd_support_hi(&obs_s1);
    let support_t1 = sd_support_hi(&obs_t1);
    let support_t0 = sd_support_hi(&obs_t0);

    let p = if conditional { 1 + k } else { 1 };
    let mut arm1 = RegressionBlock {
        y: y1,
        x: design_matrix(&rows1, conditional, k),
        b: init_b(template, &[0, 2], p),
    };
    let mut arm0 = RegressionBlock {
        y: y0,
        x: design_matrix(&rows0, conditional, k),
        b: init_b(template, &[1], p),
    };

    let mut sd_s1 = template.sds.s1;
    let mut sd_t1 = template.sds.t1;
    let mut sd_t0 = template.sds.t0;
    let mut theta11 = template.corr.theta11();

    let recorder = GammaRecorder::new(&data, design, cfg);
    let mut names = Vec::new();
    let cov_names: &[String] = if conditional { &data.covariate_names } else { &[] };
    names.extend(coef_names("s1", cov_names));
    names.extend(coef_names("t0", cov_names));
    names.extend(coef_names("t1", cov_names));
    names.extend(["sd_s1", "sd_t0", "sd_t1", "theta10", "theta11", "theta_t"].map(String::from));
    names.extend(recorder.names());

    let mean_prior_sd = match priors.mean_coefs {
        PriorKind::VagueNormal { sd, .. } => sd,
        _ => 100.0,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows_out = Vec::with_capacity(cfg.retained());

    for iter in 0..cfg.n_iter {
        // Treated arm: coefficients, then sds and theta11 by griddy Gibbs.
        let sigma1 = bivariate_sigma(sd_s1, sd_t1, theta11);
        arm1.draw_coefs(&sigma1, mean_prior_sd, &mut rng)?;
        let s1_resid = arm1.residual_crossprod();
        let n1 = arm1.n() as f64;
        {
            let r = DMatrix::from_row_slice(2, 2, &[1.0, theta11, theta11, 1.0]);
            let mut sds2 = [sd_s1, sd_t1];
            update_sd(
                &mut sds2, 0, &r, &s1_resid, n1, support_s1,
                priors.sd_s1.as_ref(), &cfg.grid, &mut rng,
            )?;
            update_sd(
                &mut sds2, 1, &r, &s1_resid, n1, support_t1,
                priors.sd_t1.as_ref(), &cfg.grid, &mut rng,
            )?;
            sd_s1 = sds2[0];
            sd_t1 = sds2[1];
        }
        {
            let mut m_star = s1_resid.clone();
            let d = [sd_s1, sd_t1];
            for a in 0..2 {
                for b in 0..2 {
                    m_star[(a, b)] /= d[a] * d[b];
                }
            }
            let target = |v: f64| {
                corr_log_likelihood(
                    &DMatrix::from_row_slice(2, 2, &[1.0, v, v, 1.0]),
                    &m_star,
                    n1,
                ) + priors.theta11.log_density(v)
            };
            theta11 = griddy_gibbs_draw(
                target,
                (-1.0 + mvn::PD_EDGE, 1.0 - mvn::PD_EDGE),
                &cfg.grid,
                &mut rng,
            )?;
        }

        // Control arm.
        let sigma0 = DMatrix::from_element(1, 1, sd_t0 * sd_t0);
        arm0.draw_coefs(&sigma0, mean_prior_sd, &mut rng)?;
        let s0_resid = arm0.residual_crossprod();
        {
            let r = DMatrix::identity(1, 1);
            let mut sds1 = [sd_t0];
            update_sd(
                &mut sds1, 0, &r, &s0_resid, arm0.n() as f64, support_t0,
                priors.sd_t0.as_ref(), &cfg.grid, &mut rng,
            )?;
            sd_t0 = sds1[0];
        }

        // Nonidentified correlations straight from their priors.
        let theta_t = priors.theta_t.sample(&mut rng);
        let theta10 = if ci {
            theta_t * theta11
        } else {
            let (lo, hi) = mvn::pd_bound_third_inner(theta11, theta_t);
            let mut accepted = None;
            for _ in 0..MAX_PD_REJECTIONS {
                let draw = priors.theta10.sample(&mut rng);
                if draw > lo && draw < hi {
                    accepted = Some(draw);
                    break;
                }
            }
            accepted.ok_or(SamplerError::RejectionStarvation)?
        };

        if iter < cfg.burn_in {
            continue;
        }

        let corr = if ci {
            CorrelationState::ConditionalIndependence { theta11, theta_t }
        } else {
            CorrelationState::Free { theta10, theta11, theta_t }
        };
        let mean = combined_mean(&arm1.b, &arm0.b);
        let spec = spec_from_state(design, mean, [sd_s1, sd_t0, sd_t1], corr);

        let mut row = Vec::with_capacity(names.len());
        for j in 0..p {
            row.push(arm1.b[(0, j)]); // S(1) coefficients
        }
        for j in 0..p {
            row.push(arm0.b[(0, j)]); // T(0) coefficients
        }
        for j in 0..p {
            row.push(arm1.b[(1, j)]); // T(1) coefficients
        }
        row.extend([sd_s1, sd_t0, sd_t1, theta10, theta11, theta_t]);
        row.extend(recorder.record(&spec)?);
        rows_out.push(row);
    }

    Ok(PosteriorDraws { names, rows: rows_out, imputed: None })
}

fn bivariate_sigma(sd_a: f64, sd_b: f64, rho: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[
            sd_a * sd_a,
            rho * sd_a * sd_b,
            rho * sd_a * sd_b,
            sd_b * sd_b,
        ],
    )
}

/// Initial coefficient matrix for the selected outcomes (rows of the
/// template mean structure, outcome order S(1)=0, T(0)=1, T(1)=2).
fn init_b(template: &ModelSpec, outcomes: &[usize], p: usize) -> DMatrix<f64> {
    let coefs = [&template.mean.s1, &template.mean.t0, &template.mean.t1];
    let mut b = DMatrix::zeros(outcomes.len(), p);
    for (row, &o) in outcomes.iter().enumerate() {
        b[(row, 0)] = coefs[o].intercept;
        for j in 0..p - 1 {
            b[(row, 1 + j)] = coefs[o].slopes.get(j).copied().unwrap_or(0.0);
        }
    }
    b
}

fn combined_mean(b1: &DMatrix<f64>, b0: &DMatrix<f64>) -> MeanStructure {
    let coefs = |m: &DMatrix<f64>, row: usize| crate::model::MeanCoefs {
        intercept: m[(row, 0)],
        slopes: (1..m.ncols()).map(|j| m[(row, j)]).collect(),
    };
    MeanStructure {
        s1: coefs(b1, 0),
        t0: coefs(b0, 0),
        t1: coefs(b1, 1),
    }
}

/// One sensitivity-scan setting for the T-outcome correlation.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaTSetting {
    Fixed(f64),
    Prior(PriorKind),
}

impl ThetaTSetting {
    pub fn sort_key(&self) -> f64 {
        match self {
            ThetaTSetting::Fixed(v) => *v,
            ThetaTSetting::Prior(p) => p.mean(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ThetaTSetting::Fixed(v) => format!("fixed({v})"),
            ThetaTSetting::Prior(PriorKind::UniformInterval { lo, hi }) => {
                format!("uniform({lo},{hi})")
            }
            ThetaTSetting::Prior(PriorKind::ScaledTruncatedBeta { a, b, lo, hi }) => {
                format!("beta({a},{b},{lo},{hi})")
            }
            ThetaTSetting::Prior(PriorKind::PointMass { value }) => format!("fixed({value})"),
            ThetaTSetting::Prior(PriorKind::VagueNormal { mean, sd }) => {
                format!("normal({mean},{sd})")
            }
        }
    }

    fn prior(&self) -> PriorKind {
        match self {
            ThetaTSetting::Fixed(v) => PriorKind::PointMass { value: *v },
            ThetaTSetting::Prior(p) => p.clone(),
        }
    }
}

/// Posterior gamma summaries for one scan setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub label: String,
    pub theta_t: f64,
    pub gamma0_mean: f64,
    pub gamma0_lo: f64,
    pub gamma0_hi: f64,
    pub gamma1_mean: f64,
    pub gamma1_lo: f64,
    pub gamma1_hi: f64,
}

/// Re-runs the observed-data algorithm once per setting of the
/// nonidentified T-outcome correlation and tabulates the gamma posteriors,
/// sorted by the setting's central value. Uses the marginal gammas for
/// conditional designs and the plain gammas otherwise.
pub fn sensitivity_scan(
    data: &Dataset,
    template: &ModelSpec,
    priors: &PriorSet,
    settings: &[ThetaTSetting],
    cfg: &ChainConfig,
) -> Result<Vec<SensitivityRow>, SamplerError> {
    for s in settings {
        if let ThetaTSetting::Fixed(v) = s {
            if !(*v > -1.0 && *v < 1.0) {
                return Err(SamplerError::Model(crate::model::ModelError::Invalid(
                    format!("fixed theta_t {v} outside (-1, 1)"),
                )));
            }
        }
    }
    let mut ordered: Vec<&ThetaTSetting> = settings.iter().collect();
    ordered.sort_by(|a, b| a.sort_key().partial_cmp(&b.sort_key()).unwrap());

    let mut rows = Vec::with_capacity(ordered.len());
    for setting in ordered {
        let scan_priors = priors.clone().with_theta_t(setting.prior());
        let draws = run_observed_data_mcmc(data, template, &scan_priors, cfg)?;
        let (g0, g1) = if template.design.is_conditional() {
            ("gamma0_marg", "gamma1_marg")
        } else {
            ("gamma0", "gamma1")
        };
        let g0col = draws.column(g0).ok_or_else(|| {
            SamplerError::ChainDiverged(format!("missing {g0} column in scan draws"))
        })?;
        let g1col = draws.column(g1).expect("gamma1 column always recorded");
        let (g0_lo, g0_hi) = stats::central_interval_95(&g0col);
        let (g1_lo, g1_hi) = stats::central_interval_95(&g1col);
        rows.push(SensitivityRow {
            label: setting.label(),
            theta_t: setting.sort_key(),
            gamma0_mean: stats::mean(&g0col),
            gamma0_lo: g0_lo,
            gamma0_hi: g0_hi,
            gamma1_mean: stats::mean(&g1col),
            gamma1_lo: g1_lo,
            gamma1_hi: g1_hi,
        });
    }
    Ok(rows)
}
