//! `surrocep fit`: run one estimation algorithm on a dataset and write
//! posterior summaries, full draws, a trace file and the convergence
//! report.

use super::{ensure_out_dir, load_config};
use crate::config::{self};
use crate::{resolve_seed, CliError};
use clap::Args;
use std::path::PathBuf;
use surrocep::model::{surrogate_valid, Design, ModelSpec};
use surrocep::priors::{ParamTarget, PriorSet, PriorSpec};
use surrocep::samplers::{
    convergence_report, run_imputation_mcmc, run_observed_data_mcmc, ChainConfig, PosteriorDraws,
};
use surrocep::Dataset;

#[derive(Args)]
pub struct FitArgs {
    /// Masked trial data file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Analysis design 1-4: original/difference endpoint, marginal or
    /// conditional on covariates.
    #[arg(long)]
    pub design: Option<u8>,
    /// Assume conditional independence (S(1) independent of T(0) given
    /// T(1) and covariates).
    #[arg(long)]
    pub ci: bool,
    /// observed (default) or imputation.
    #[arg(long)]
    pub algorithm: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Covariate values for conditional gamma0 draws, e.g. `--at x=0`
    /// (repeatable). Defaults to both levels of a binary covariate or the
    /// covariate mean.
    #[arg(long)]
    pub at: Vec<String>,
    /// Skip the marginalized gamma columns for conditional designs.
    #[arg(long)]
    pub no_marginal: bool,
    /// Covariate column holding the pre-treatment outcome measurement
    /// (needed by designs 3 and 4 on multi-covariate data).
    #[arg(long)]
    pub baseline: Option<String>,
    /// Imputation algorithm only: keep every k-th retained sweep of
    /// imputed missing outcomes in imputations.csv.
    #[arg(long, value_name = "K")]
    pub keep_imputations: Option<usize>,
    /// Prior for the nonidentified T(0)-T(1) correlation.
    #[arg(long)]
    pub prior_theta_t: Option<String>,
    /// Prior for the nonidentified S(1)-T(0) correlation (no-CI fits).
    #[arg(long)]
    pub prior_theta10: Option<String>,
    /// Prior for the identified S(1)-T(1) correlation.
    #[arg(long)]
    pub prior_theta11: Option<String>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn parse_algorithm(raw: &str) -> Result<bool, CliError> {
    match raw.to_ascii_lowercase().as_str() {
        "observed" => Ok(false),
        "imputation" => Ok(true),
        other => Err(CliError::config(format!(
            "unknown algorithm '{other}' (use observed or imputation)"
        ))),
    }
}

pub fn run(args: FitArgs) -> Result<(), CliError> {
    let cfg_file = load_config(&args.config)?;
    let data_path = args
        .data
        .clone()
        .or_else(|| cfg_file.get("data").map(PathBuf::from))
        .ok_or_else(|| CliError::config("missing --data"))?;
    let mut data = Dataset::read_path(&data_path)?;
    if data.records.is_empty() {
        return Err(CliError::config(format!(
            "data file {} contains no records",
            data_path.display()
        )));
    }
    if let Some(name) = args.baseline.as_deref().or_else(|| cfg_file.get("baseline")) {
        data = data.with_baseline_named(name)?;
    }

    let design_no = config::merge(args.design, &cfg_file, "design")?.unwrap_or(1);
    let design = Design::from_number(design_no)
        .ok_or_else(|| CliError::config(format!("design must be 1-4, got {design_no}")))?;
    let ci = args.ci || cfg_file.parsed::<bool>("ci")?.unwrap_or(false);
    let imputation = parse_algorithm(
        args.algorithm
            .as_deref()
            .or_else(|| cfg_file.get("algorithm"))
            .unwrap_or("observed"),
    )?;

    let mut priors = if ci { PriorSet::default_ci() } else { PriorSet::default_no_ci() };
    let mut specs: Vec<PriorSpec> = Vec::new();
    for (flag, key, target) in [
        (&args.prior_theta_t, "prior_theta_t", ParamTarget::ThetaT),
        (&args.prior_theta10, "prior_theta10", ParamTarget::Theta10),
        (&args.prior_theta11, "prior_theta11", ParamTarget::Theta11),
    ] {
        if let Some(raw) = flag.as_deref().or_else(|| cfg_file.get(key)) {
            specs.push(PriorSpec { kind: config::parse_prior(raw)?, target });
        }
    }
    if !specs.is_empty() {
        priors = PriorSet::from_specs(&specs, ci).map_err(|e| CliError::config(e.to_string()))?;
    }

    let gamma_at: Result<Vec<Vec<f64>>, CliError> = args
        .at
        .iter()
        .map(|raw| config::parse_at(raw, &data.covariate_names))
        .collect();
    let chain = ChainConfig {
        n_iter: config::merge(args.iters, &cfg_file, "iters")?.unwrap_or(3000),
        burn_in: config::merge(args.burn_in, &cfg_file, "burn_in")?.unwrap_or(500),
        seed: resolve_seed(config::merge(args.seed, &cfg_file, "seed")?),
        gamma_at: gamma_at?,
        marginal_gammas: design.is_conditional() && !args.no_marginal,
        store_imputations: config::merge(args.keep_imputations, &cfg_file, "keep_imputations")?,
        ..ChainConfig::default()
    };

    let template = ModelSpec::template_from_data(&data, design, ci);
    let draws = if imputation {
        run_imputation_mcmc(&data, &template, &priors, &chain)?
    } else {
        run_observed_data_mcmc(&data, &template, &priors, &chain)?
    };

    ensure_out_dir(&args.out_dir)?;
    write_outputs(&args.out_dir, &draws, chain.burn_in)?;
    eprintln!(
        "fit design {} ({}) done: {} retained draws -> {}",
        design.number(),
        if imputation { "imputation" } else { "observed" },
        draws.len(),
        args.out_dir.display()
    );
    Ok(())
}

pub fn write_outputs(
    out_dir: &std::path::Path,
    draws: &PosteriorDraws,
    burn_in: usize,
) -> Result<(), CliError> {
    // Full draws.
    let mut buf = Vec::new();
    draws.write_delimited(&mut buf).map_err(CliError::from)?;
    std::fs::write(out_dir.join("draws.csv"), buf)?;

    // Posterior summary with the valid-surrogate verdict attached to each
    // gamma0-type row (paired with the matching slope interval).
    let mut summary = csv_writer(&out_dir.join("summary.csv"))?;
    write_row(&mut summary, ["name", "mean", "sd", "q025", "q975", "verdict"])?;
    for s in draws.summaries() {
        let verdict = verdict_for(draws, &s.name);
        write_row(
            &mut summary,
            [
                s.name.clone(),
                s.mean.to_string(),
                s.sd.to_string(),
                s.q025.to_string(),
                s.q975.to_string(),
                verdict.to_string(),
            ],
        )?;
    }
    summary.flush()?;

    // Convergence report.
    let report = convergence_report(draws).map_err(CliError::from)?;
    let mut rhat = csv_writer(&out_dir.join("rhat.csv"))?;
    write_row(&mut rhat, ["parameter", "r_hat", "flagged"])?;
    for p in &report.params {
        write_row(&mut rhat, [p.name.clone(), p.r_hat.to_string(), p.flagged.to_string()])?;
    }
    rhat.flush()?;

    // Long-format trace series for external plotting.
    let mut trace = csv_writer(&out_dir.join("trace.csv"))?;
    write_row(&mut trace, ["iteration", "parameter", "value"])?;
    for (row_idx, row) in draws.rows.iter().enumerate() {
        for (col_idx, name) in draws.names.iter().enumerate() {
            write_row(
                &mut trace,
                [(burn_in + row_idx).to_string(), name.clone(), row[col_idx].to_string()],
            )?;
        }
    }
    trace.flush()?;

    // Thinned imputation snapshots, when the sampler kept them.
    if let Some(imp) = &draws.imputed {
        let mut out = csv_writer(&out_dir.join("imputations.csv"))?;
        let mut header = vec!["iteration".to_string()];
        header.extend(imp.names.iter().cloned());
        write_row(&mut out, header)?;
        for (it, row) in imp.iterations.iter().zip(&imp.rows) {
            let mut rec = vec![it.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            write_row(&mut out, rec)?;
        }
        out.flush()?;
    }
    Ok(())
}

pub fn csv_writer(path: &std::path::Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_row<I, T>(w: &mut csv::Writer<std::fs::File>, row: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(row)
        .map_err(|e| CliError::config(format!("csv write failed: {e}")))
}

/// The valid/invalid verdict for a gamma0 column: its own interval must
/// cover zero while the paired slope interval excludes it.
fn verdict_for(draws: &PosteriorDraws, name: &str) -> &'static str {
    let slope_col = if name == "gamma0" {
        "gamma1"
    } else if name == "gamma0_marg" {
        "gamma1_marg"
    } else if name.starts_with("gamma0[") {
        "gamma1"
    } else {
        return "";
    };
    let (Some(g0), Some(g1)) = (draws.summary(name), draws.summary(slope_col)) else {
        return "";
    };
    if surrogate_valid((g0.q025, g0.q975), (g1.q025, g1.q975)) {
        "valid"
    } else {
        "invalid"
    }
}
