//! Full imputation MCMC: data augmentation over the missing potential
//! outcomes plus separation-strategy parameter updates on the completed
//! trivariate data.
//!
//! Each sweep draws, in order:
//! 1. the missing outcomes of every record from their Gaussian
//!    conditionals given the current parameters (control arm: `(S(1),
//!    T(1)) | T(0), x`; treated arm: `T(0) | S(1), T(1), x`),
//! 2. all mean coefficients jointly from their conjugate normal
//!    conditional under vague normal priors,
//! 3. each residual sd by griddy Gibbs on `(1e-4, 10 * empirical sd)`,
//! 4. each free correlation by griddy Gibbs on the interval keeping the
//!    matrix positive definite. Under the conditional-independence
//!    constraint only `theta_t` and `theta11` are drawn and `theta10` is
//!    their product inside the likelihood.

use super::common::{
    corr_log_likelihood, design_matrix, mean_from_matrix, sd_support_hi, spec_from_state,
    update_sd, GammaRecorder, RegressionBlock,
};
use super::{ChainConfig, ImputedDraws, PosteriorDraws, SamplerError};
use crate::data::Dataset;
use crate::model::{endpoint_transform_dataset, CorrelationState, ModelSpec};
use crate::mvn;
use crate::priors::PriorSet;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn run_imputation_mcmc(
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

    let n = data.records.len();
    let rows: Vec<&Vec<f64>> = data.records.iter().map(|r| &r.x).collect();
    let x = design_matrix(&rows, conditional, k);

    // Completed outcome matrix; missing slots start at the observed means
    // of their own outcome (zero fallback for empty arms).
    let obs_s1: Vec<f64> = data.arm(1).filter_map(|r| r.s1).collect();
    let obs_t0: Vec<f64> = data.arm(0).filter_map(|r| r.t0).collect();
    let obs_t1: Vec<f64> = data.arm(1).filter_map(|r| r.t1).collect();
    let fallback = |v: &[f64]| if v.is_empty() { 0.0 } else { crate::stats::mean(v) };
    let (m_s1, m_t0, m_t1) = (fallback(&obs_s1), fallback(&obs_t0), fallback(&obs_t1));
    let mut y = DMatrix::zeros(n, 3);
    for (i, rec) in data.records.iter().enumerate() {
        y[(i, 0)] = rec.s1.unwrap_or(m_s1);
        y[(i, 1)] = rec.t0.unwrap_or(m_t0);
        y[(i, 2)] = rec.t1.unwrap_or(m_t1);
    }

    let support_hi = [
        sd_support_hi(&obs_s1),
        sd_support_hi(&obs_t0),
        sd_support_hi(&obs_t1),
    ];

    let mut block = RegressionBlock { y, x, b: initial_coefs(template, k) };
    let mut sds = [template.sds.s1, template.sds.t0, template.sds.t1];
    let (mut theta10, mut theta11, mut theta_t) = match template.corr {
        CorrelationState::Free { theta10, theta11, theta_t } => (theta10, theta11, theta_t),
        CorrelationState::ConditionalIndependence { theta11, theta_t } => {
            (theta_t * theta11, theta11, theta_t)
        }
    };

    let recorder = GammaRecorder::new(&data, design, cfg);
    let mut names = Vec::new();
    for (outcome, _) in [("s1", 0), ("t0", 1), ("t1", 2)] {
        names.extend(super::common::coef_names(
            outcome,
            if conditional { &data.covariate_names } else { &[] },
        ));
    }
    names.extend(["sd_s1", "sd_t0", "sd_t1", "theta10", "theta11", "theta_t"].map(String::from));
    names.extend(recorder.names());

    let missing_names: Vec<String> = data
        .records
        .iter()
        .flat_map(|r| {
            if r.z == 0 {
                vec![format!("s1[{}]", r.id), format!("t1[{}]", r.id)]
            } else {
                vec![format!("t0[{}]", r.id)]
            }
        })
        .collect();
    let mut imputed = cfg.store_imputations.map(|_| ImputedDraws {
        names: missing_names,
        iterations: Vec::new(),
        rows: Vec::new(),
    });

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows_out = Vec::with_capacity(cfg.retained());

    let mean_prior_sd = match priors.mean_coefs {
        crate::priors::PriorKind::VagueNormal { sd, .. } => sd,
        _ => 100.0,
    };

    for iter in 0..cfg.n_iter {
        // 1. Impute missing outcomes.
        let corr_state = current_corr(ci, theta10, theta11, theta_t);
        let sigma = sigma_from(&sds, &corr_state);
        impute_missing(&data, &mut block, &sigma, &mut rng)?;

        // 2. Mean coefficients.
        block.draw_coefs(&sigma, mean_prior_sd, &mut rng)?;
        let s_resid = block.residual_crossprod();
        if !s_resid.iter().all(|v| v.is_finite()) {
            return Err(SamplerError::ChainDiverged(format!(
                "non-finite residuals at iteration {iter}"
            )));
        }

        // 3. Standard deviations.
        let r = current_corr(ci, theta10, theta11, theta_t).matrix();
        let sd_priors = [&priors.sd_s1, &priors.sd_t0, &priors.sd_t1];
        for j in 0..3 {
            update_sd(
                &mut sds,
                j,
                &r,
                &s_resid,
                n as f64,
                support_hi[j],
                sd_priors[j].as_ref(),
                &cfg.grid,
                &mut rng,
            )?;
        }

        // 4. Correlations on the standardized residual cross-product.
        let mut m_star = s_resid.clone();
        for a in 0..3 {
            for b in 0..3 {
                m_star[(a, b)] /= sds[a] * sds[b];
            }
        }
        let nf = n as f64;
        if ci {
            // theta_t and theta11 only; theta10 rides along as the product.
            if !matches!(priors.theta_t, crate::priors::PriorKind::PointMass { .. }) {
                let t11 = theta11;
                let target = |v: f64| {
                    corr_log_likelihood(&mvn::correlation_matrix(v * t11, t11, v), &m_star, nf)
                        + priors.theta_t.log_density(v)
                };
                theta_t = super::griddy::griddy_gibbs_draw(
                    target,
                    (-1.0 + mvn::PD_EDGE, 1.0 - mvn::PD_EDGE),
                    &cfg.grid,
                    &mut rng,
                )?;
            }
            let tt = theta_t;
            let target = |v: f64| {
                corr_log_likelihood(&mvn::correlation_matrix(tt * v, v, tt), &m_star, nf)
                    + priors.theta11.log_density(v)
            };
            theta11 = super::griddy::griddy_gibbs_draw(
                target,
                (-1.0 + mvn::PD_EDGE, 1.0 - mvn::PD_EDGE),
                &cfg.grid,
                &mut rng,
            )?;
            theta10 = theta_t * theta11;
        } else {
            // Each correlation in turn over its positive-definiteness
            // interval given the other two.
            if !matches!(priors.theta10, crate::priors::PriorKind::PointMass { .. }) {
                let (t11, tt) = (theta11, theta_t);
                let target = |v: f64| {
                    corr_log_likelihood(&mvn::correlation_matrix(v, t11, tt), &m_star, nf)
                        + priors.theta10.log_density(v)
                };
                theta10 = super::griddy::griddy_gibbs_draw(
                    target,
                    mvn::pd_bound_third_inner(theta11, theta_t),
                    &cfg.grid,
                    &mut rng,
                )?;
            }
            {
                let (t10, tt) = (theta10, theta_t);
                let target = |v: f64| {
                    corr_log_likelihood(&mvn::correlation_matrix(t10, v, tt), &m_star, nf)
                        + priors.theta11.log_density(v)
                };
                theta11 = super::griddy::griddy_gibbs_draw(
                    target,
                    mvn::pd_bound_third_inner(theta10, theta_t),
                    &cfg.grid,
                    &mut rng,
                )?;
            }
            if !matches!(priors.theta_t, crate::priors::PriorKind::PointMass { .. }) {
                let (t10, t11) = (theta10, theta11);
                let target = |v: f64| {
                    corr_log_likelihood(&mvn::correlation_matrix(t10, t11, v), &m_star, nf)
                        + priors.theta_t.log_density(v)
                };
                theta_t = super::griddy::griddy_gibbs_draw(
                    target,
                    mvn::pd_bound_third_inner(theta10, theta11),
                    &cfg.grid,
                    &mut rng,
                )?;
            }
        }

        if iter < cfg.burn_in {
            continue;
        }

        // 5. Record parameters and derived gammas.
        let corr_state = current_corr(ci, theta10, theta11, theta_t);
        let spec = spec_from_state(design, mean_from_matrix(&block.b), sds, corr_state);
        let mut row = Vec::with_capacity(names.len());
        for outcome in 0..3 {
            for j in 0..block.p() {
                row.push(block.b[(outcome, j)]);
            }
        }
        row.extend([sds[0], sds[1], sds[2], theta10, theta11, theta_t]);
        row.extend(recorder.record(&spec)?);
        rows_out.push(row);

        if let (Some(imp), Some(thin)) = (&mut imputed, cfg.store_imputations) {
            let kept = iter - cfg.burn_in;
            if thin > 0 && kept.is_multiple_of(thin) {
                let mut snapshot = Vec::with_capacity(imp.names.len());
                for (i, rec) in data.records.iter().enumerate() {
                    if rec.z == 0 {
                        snapshot.push(block.y[(i, 0)]);
                        snapshot.push(block.y[(i, 2)]);
                    } else {
                        snapshot.push(block.y[(i, 1)]);
                    }
                }
                imp.iterations.push(iter);
                imp.rows.push(snapshot);
            }
        }
    }

    Ok(PosteriorDraws { names, rows: rows_out, imputed })
}

fn current_corr(ci: bool, theta10: f64, theta11: f64, theta_t: f64) -> CorrelationState {
    if ci {
        CorrelationState::ConditionalIndependence { theta11, theta_t }
    } else {
        CorrelationState::Free { theta10, theta11, theta_t }
    }
}

fn sigma_from(sds: &[f64; 3], corr: &CorrelationState) -> DMatrix<f64> {
    let mut m = corr.matrix();
    for a in 0..3 {
        for b in 0..3 {
            m[(a, b)] *= sds[a] * sds[b];
        }
    }
    m
}

fn initial_coefs(template: &ModelSpec, k: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(3, 1 + k);
    let coefs = [&template.mean.s1, &template.mean.t0, &template.mean.t1];
    for (row, c) in coefs.iter().enumerate() {
        b[(row, 0)] = c.intercept;
        for j in 0..k {
            b[(row, 1 + j)] = c.slopes.get(j).copied().unwrap_or(0.0);
        }
    }
    b
}

/// Draws the missing outcome slots of every record from the current
/// trivariate model. Only the missing entries of the completed matrix are
/// rewritten; observed entries are never touched.
fn impute_missing(
    data: &Dataset,
    block: &mut RegressionBlock,
    sigma: &DMatrix<f64>,
    rng: &mut impl Rng,
) -> Result<(), SamplerError> {
    // Control arm: (S(1), T(1)) | T(0).
    let (w0, cov0) = mvn::conditional_parts(sigma, &[1])?;
    let chol0 = mvn::cholesky(&cov0)?;
    // Treated arm: T(0) | (S(1), T(1)).
    let (w1, cov1) = mvn::conditional_parts(sigma, &[0, 2])?;
    let sd1 = cov1[(0, 0)].sqrt();

    for (i, rec) in data.records.iter().enumerate() {
        // Row i of the design matrix times B^T gives the mean vector.
        let mut mu = [0.0f64; 3];
        for (outcome, slot) in mu.iter_mut().enumerate() {
            let mut v = 0.0;
            for j in 0..block.p() {
                v += block.b[(outcome, j)] * block.x[(i, j)];
            }
            *slot = v;
        }
        if rec.z == 0 {
            let dt0 = block.y[(i, 1)] - mu[1];
            let mean_s1 = mu[0] + w0[(0, 0)] * dt0;
            let mean_t1 = mu[2] + w0[(1, 0)] * dt0;
            let z = DVector::from_fn(2, |_, _| StandardNormal.sample(rng));
            let noise = &chol0 * z;
            block.y[(i, 0)] = mean_s1 + noise[0];
            block.y[(i, 2)] = mean_t1 + noise[1];
        } else {
            let ds1 = block.y[(i, 0)] - mu[0];
            let dt1 = block.y[(i, 2)] - mu[2];
            let mean_t0 = mu[1] + w1[(0, 0)] * ds1 + w1[(0, 1)] * dt1;
            let z: f64 = StandardNormal.sample(rng);
            block.y[(i, 1)] = mean_t0 + sd1 * z;
        }
    }
    Ok(())
}
