//! `surrocep sensitivity`: rerun the observed-data fit across fixed
//! values (or alternative priors) of the nonidentified T-outcome
//! correlation and tabulate/plot how the gamma posteriors move.

use super::{ensure_out_dir, load_config, write_text};
use crate::config::{self};
use crate::plot::sensitivity_svg;
use crate::{resolve_seed, CliError};
use clap::Args;
use std::path::PathBuf;
use surrocep::model::{Design, ModelSpec};
use surrocep::priors::PriorSet;
use surrocep::samplers::{sensitivity_scan, ChainConfig, ThetaTSetting};
use surrocep::Dataset;

#[derive(Args)]
pub struct SensitivityArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub design: Option<u8>,
    #[arg(long)]
    pub ci: bool,
    /// Comma-separated fixed values for the T-outcome correlation, each
    /// strictly inside (-1, 1).
    #[arg(long, allow_hyphen_values = true)]
    pub values: Option<String>,
    /// Semicolon-separated prior specs to scan, e.g.
    /// `uniform(-1,1);beta(5,6,-0.4,1)`.
    #[arg(long)]
    pub priors: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub baseline: Option<String>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: SensitivityArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let data_path = args
        .data
        .clone()
        .or_else(|| cfg.get("data").map(PathBuf::from))
        .ok_or_else(|| CliError::config("missing --data"))?;
    let mut data = Dataset::read_path(&data_path)?;
    if data.records.is_empty() {
        return Err(CliError::config("data file contains no records"));
    }
    if let Some(name) = args.baseline.as_deref().or_else(|| cfg.get("baseline")) {
        data = data.with_baseline_named(name)?;
    }
    let design_no = config::merge(args.design, &cfg, "design")?.unwrap_or(1);
    let design = Design::from_number(design_no)
        .ok_or_else(|| CliError::config(format!("design must be 1-4, got {design_no}")))?;
    let ci = args.ci || cfg.parsed::<bool>("ci")?.unwrap_or(false);

    let mut settings: Vec<ThetaTSetting> = Vec::new();
    if let Some(raw) = args.values.as_deref().or_else(|| cfg.get("values")) {
        for part in raw.split(',').filter(|s| !s.trim().is_empty()) {
            let v: f64 = part
                .trim()
                .parse()
                .map_err(|e| CliError::config(format!("bad value '{part}': {e}")))?;
            if !(v > -1.0 && v < 1.0) {
                return Err(CliError::config(format!(
                    "fixed correlation {v} must lie strictly inside (-1, 1)"
                )));
            }
            settings.push(ThetaTSetting::Fixed(v));
        }
    }
    if let Some(raw) = args.priors.as_deref().or_else(|| cfg.get("priors")) {
        for part in raw.split(';').filter(|s| !s.trim().is_empty()) {
            settings.push(ThetaTSetting::Prior(config::parse_prior(part)?));
        }
    }

    let chain = ChainConfig {
        n_iter: config::merge(args.iters, &cfg, "iters")?.unwrap_or(3000),
        burn_in: config::merge(args.burn_in, &cfg, "burn_in")?.unwrap_or(500),
        seed: resolve_seed(config::merge(args.seed, &cfg, "seed")?),
        marginal_gammas: design.is_conditional(),
        ..ChainConfig::default()
    };
    let template = ModelSpec::template_from_data(&data, design, ci);
    let base_priors = if ci { PriorSet::default_ci() } else { PriorSet::default_no_ci() };
    let rows = sensitivity_scan(&data, &template, &base_priors, &settings, &chain)?;

    ensure_out_dir(&args.out_dir)?;
    let mut table = crate::commands::fit::csv_writer(&args.out_dir.join("sensitivity.csv"))?;
    crate::commands::fit::write_row(
        &mut table,
        ["setting", "theta_t", "gamma0_mean", "gamma0_q025", "gamma0_q975", "gamma1_mean",
         "gamma1_q025", "gamma1_q975"],
    )?;
    for r in &rows {
        crate::commands::fit::write_row(
            &mut table,
            [
                r.label.clone(),
                r.theta_t.to_string(),
                r.gamma0_mean.to_string(),
                r.gamma0_lo.to_string(),
                r.gamma0_hi.to_string(),
                r.gamma1_mean.to_string(),
                r.gamma1_lo.to_string(),
                r.gamma1_hi.to_string(),
            ],
        )?;
    }
    table.flush()?;
    if !rows.is_empty() {
        write_text(&args.out_dir.join("sensitivity.svg"), &sensitivity_svg(&rows))?;
    }
    eprintln!("scanned {} settings -> {}", rows.len(), args.out_dir.display());
    Ok(())
}
