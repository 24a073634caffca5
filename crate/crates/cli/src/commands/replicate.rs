//! `surrocep replicate`: repeated generate-and-fit studies summarized as
//! a tidy long-format table (bias, average posterior SD, SD of point
//! estimates, coverage), optionally rescaled by the complete-data oracle
//! variability.

use super::{ensure_out_dir, load_config, write_text};
use crate::commands::fit::parse_algorithm;
use crate::commands::simulate::resolve_setting;
use crate::config::{self};
use crate::{resolve_seed, CliError};
use clap::Args;
use std::path::PathBuf;
use surrocep::model::Design;
use surrocep::priors::{ParamTarget, PriorSet, PriorSpec};
use surrocep::samplers::ChainConfig;
use surrocep::sim::{self, Algorithm, EstimandSet, ReplicationRequest, ReplicationSummary};

#[derive(Args)]
pub struct ReplicateArgs {
    /// Built-in setting name (A, B, C, D, E, DMD).
    #[arg(long)]
    pub setting: Option<String>,
    /// Custom generator parameter file.
    #[arg(long, conflicts_with = "setting")]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub design: Option<u8>,
    #[arg(long)]
    pub ci: bool,
    #[arg(long)]
    pub algorithm: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Outcome noise override: gaussian, t(df) or gamma(shape).
    #[arg(long)]
    pub noise: Option<String>,
    /// Track conditional gamma0 at these covariate values (repeatable,
    /// e.g. `--at x=0`); default tracks the marginal gamma pair.
    #[arg(long)]
    pub at: Vec<String>,
    /// Divide bias/SE/SD by the oracle-estimate SD across replications.
    #[arg(long)]
    pub scale_by_oracle: bool,
    #[arg(long)]
    pub prior_theta_t: Option<String>,
    #[arg(long)]
    pub prior_theta10: Option<String>,
    #[arg(long)]
    pub prior_theta11: Option<String>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: ReplicateArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let mut setting = resolve_setting(&args.setting, &args.params, &cfg)?;
    if let Some(noise) = args.noise.as_deref().or_else(|| cfg.get("noise")) {
        setting = setting.with_noise(config::parse_noise(noise)?);
    }

    let design_no = config::merge(args.design, &cfg, "design")?.unwrap_or(1);
    let design = Design::from_number(design_no)
        .ok_or_else(|| CliError::config(format!("design must be 1-4, got {design_no}")))?;
    let ci = args.ci || cfg.parsed::<bool>("ci")?.unwrap_or(false);
    let imputation = parse_algorithm(
        args.algorithm
            .as_deref()
            .or_else(|| cfg.get("algorithm"))
            .unwrap_or("observed"),
    )?;
    let n = config::merge(args.n, &cfg, "n")?.unwrap_or(100);
    let reps = config::merge(args.reps, &cfg, "reps")?.unwrap_or(100);
    if reps == 0 {
        return Err(CliError::config("reps must be at least 1"));
    }

    let mut priors = if ci { PriorSet::default_ci() } else { PriorSet::default_no_ci() };
    let mut specs = Vec::new();
    for (flag, key, target) in [
        (&args.prior_theta_t, "prior_theta_t", ParamTarget::ThetaT),
        (&args.prior_theta10, "prior_theta10", ParamTarget::Theta10),
        (&args.prior_theta11, "prior_theta11", ParamTarget::Theta11),
    ] {
        if let Some(raw) = flag.as_deref().or_else(|| cfg.get(key)) {
            specs.push(PriorSpec { kind: config::parse_prior(raw)?, target });
        }
    }
    if !specs.is_empty() {
        priors = PriorSet::from_specs(&specs, ci).map_err(|e| CliError::config(e.to_string()))?;
    }

    let estimands = if args.at.is_empty() {
        EstimandSet::Marginal
    } else {
        let names = setting.covariates.names();
        let values: Result<Vec<Vec<f64>>, CliError> =
            args.at.iter().map(|raw| config::parse_at(raw, &names)).collect();
        EstimandSet::ConditionalAt(values?)
    };

    let req = ReplicationRequest {
        design,
        ci,
        algorithm: if imputation { Algorithm::Imputation } else { Algorithm::Observed },
        priors,
        cfg: ChainConfig {
            n_iter: config::merge(args.iters, &cfg, "iters")?.unwrap_or(3000),
            burn_in: config::merge(args.burn_in, &cfg, "burn_in")?.unwrap_or(500),
            seed: resolve_seed(config::merge(args.seed, &cfg, "seed")?),
            ..ChainConfig::default()
        },
        estimands,
        scale_by_oracle: args.scale_by_oracle || cfg.parsed::<bool>("scale_by_oracle")?.unwrap_or(false),
    };

    let summary = sim::run_replications(&setting, n, reps, &req)?;
    ensure_out_dir(&args.out_dir)?;
    write_text(&args.out_dir.join("replication.csv"), &long_format(&summary))?;
    eprintln!(
        "{} replications of setting {} done ({} failed) -> {}",
        summary.n_reps,
        summary.setting,
        summary.n_failed,
        args.out_dir.display()
    );
    Ok(())
}

/// Tidy long format: one `(estimand, metric, value)` row per cell.
pub fn long_format(summary: &ReplicationSummary) -> String {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["setting", "design", "ci", "algorithm", "n", "reps", "estimand", "metric", "value"])
        .expect("in-memory write");
    let prefix = [
        summary.setting.clone(),
        summary.design.number().to_string(),
        summary.ci.to_string(),
        summary.algorithm.label().to_string(),
        summary.n.to_string(),
        summary.n_reps.to_string(),
    ];
    let mut row = |estimand: &str, metric: &str, value: String| {
        let mut rec: Vec<String> = prefix.to_vec();
        rec.push(estimand.to_string());
        rec.push(metric.to_string());
        rec.push(value);
        out.write_record(&rec).expect("in-memory write");
    };
    row("", "n_failed", summary.n_failed.to_string());
    for e in &summary.estimands {
        let mut cells: Vec<(&str, Option<f64>)> = vec![
            ("truth", Some(e.truth)),
            ("reference_truth", e.reference),
            ("mean_estimate", Some(e.mean_estimate)),
            ("bias", Some(e.bias)),
            ("avg_posterior_sd", Some(e.avg_posterior_sd)),
            ("sd_estimates", e.sd_estimates),
            ("coverage_truth", Some(e.coverage_truth)),
            ("covers_zero", Some(e.covers_zero)),
        ];
        cells.push(("oracle_sd", e.oracle_sd));
        cells.push(("scaled_bias", e.scaled_bias));
        cells.push(("scaled_se", e.scaled_se));
        cells.push(("scaled_sd", e.scaled_sd));
        for (metric, value) in cells {
            if let Some(v) = value {
                row(&e.name, metric, v.to_string());
            }
        }
    }
    String::from_utf8(out.into_inner().expect("in-memory flush")).expect("utf8 csv")
}
