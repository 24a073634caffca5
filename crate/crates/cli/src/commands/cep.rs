//! `surrocep cep`: turn saved posterior draws into CEP curves — one line
//! with a pointwise 95% band per conditioning value — plus the observed
//! surrogate density, as SVG and as a companion table.

use super::{ensure_out_dir, load_config, write_text};
use crate::plot::{cep_svg, LabeledCurve};
use crate::{config, CliError};
use clap::Args;
use std::path::PathBuf;
use surrocep::model::s_grid_around;
use surrocep::samplers::PosteriorDraws;
use surrocep::stats;
use surrocep::Dataset;

#[derive(Args)]
pub struct CepArgs {
    /// Draws file written by `fit`.
    #[arg(long)]
    pub draws: Option<PathBuf>,
    /// The dataset the fit used (for the observed surrogate density).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Conditioning label(s) to plot, matching the fit's gamma0 columns:
    /// `marginal`, or covariate values like `x=1` (repeatable). Default:
    /// every gamma0 column in the draws.
    #[arg(long)]
    pub at: Vec<String>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Maps a requested label to a draws column name.
fn column_for_label(label: &str, draws: &PosteriorDraws) -> Result<String, CliError> {
    let trimmed = label.trim();
    if trimmed.eq_ignore_ascii_case("marginal") {
        for cand in ["gamma0_marg", "gamma0"] {
            if draws.column_index(cand).is_some() {
                return Ok(cand.to_string());
            }
        }
        return Err(CliError::config("draws contain no marginal gamma0 column"));
    }
    let name = format!("gamma0[{trimmed}]");
    if draws.column_index(&name).is_some() {
        return Ok(name);
    }
    if draws.column_index(trimmed).is_some() {
        return Ok(trimmed.to_string());
    }
    Err(CliError::config(format!(
        "no gamma0 column matches '{label}'; available: {}",
        draws
            .names
            .iter()
            .filter(|n| n.starts_with("gamma0"))
            .cloned()
            .collect::<Vec<_>>()
            .join(", ")
    )))
}

fn slope_column_for(g0: &str) -> &'static str {
    if g0 == "gamma0_marg" {
        "gamma1_marg"
    } else {
        "gamma1"
    }
}

pub fn run(args: CepArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let draws_path = args
        .draws
        .clone()
        .or_else(|| cfg.get("draws").map(PathBuf::from))
        .ok_or_else(|| CliError::config("missing --draws"))?;
    let data_path = args
        .data
        .clone()
        .or_else(|| cfg.get("data").map(PathBuf::from))
        .ok_or_else(|| CliError::config("missing --data"))?;
    let draws = PosteriorDraws::read_delimited(
        std::fs::File::open(&draws_path)
            .map_err(|e| CliError::config(format!("cannot open {}: {e}", draws_path.display())))?,
    )?;
    if draws.is_empty() {
        return Err(CliError::config("draws file has no rows"));
    }
    let data = Dataset::read_path(&data_path)?;
    let s1_obs: Vec<f64> = data.arm(1).filter_map(|r| r.s1).collect();

    // Requested columns, or every gamma0 column present.
    let columns: Vec<String> = if args.at.is_empty() {
        draws
            .names
            .iter()
            .filter(|n| n.starts_with("gamma0") && !n.starts_with("gamma1"))
            .cloned()
            .collect()
    } else {
        args.at
            .iter()
            .map(|label| column_for_label(label, &draws))
            .collect::<Result<_, _>>()?
    };
    if columns.is_empty() {
        return Err(CliError::config("no gamma0 columns to plot"));
    }
    warn_outside_observed_range(&columns, &data);

    let (grid_mean, grid_sd) = if s1_obs.len() >= 2 {
        (stats::mean(&s1_obs), stats::sd(&s1_obs))
    } else {
        (0.0, 1.0)
    };
    let s_grid = s_grid_around(grid_mean, grid_sd);

    ensure_out_dir(&args.out_dir)?;
    let mut curves = Vec::new();
    let mut table = crate::commands::fit::csv_writer(&args.out_dir.join("cep_curve.csv"))?;
    crate::commands::fit::write_row(&mut table, ["conditioning", "s", "expected", "lower", "upper"])?;
    for col in &columns {
        let g0 = draws.column(col).expect("column checked above");
        let g1 = draws
            .column(slope_column_for(col))
            .ok_or_else(|| CliError::config(format!("draws lack a slope column for {col}")))?;
        let mut mean_v = Vec::with_capacity(s_grid.len());
        let mut lo_v = Vec::with_capacity(s_grid.len());
        let mut hi_v = Vec::with_capacity(s_grid.len());
        for &s in &s_grid {
            let values: Vec<f64> = g0.iter().zip(&g1).map(|(a, b)| a + b * s).collect();
            let (lo, hi) = stats::central_interval_95(&values);
            mean_v.push(stats::mean(&values));
            lo_v.push(lo);
            hi_v.push(hi);
        }
        for (i, &s) in s_grid.iter().enumerate() {
            crate::commands::fit::write_row(
                &mut table,
                [
                    col.clone(),
                    s.to_string(),
                    mean_v[i].to_string(),
                    lo_v[i].to_string(),
                    hi_v[i].to_string(),
                ],
            )?;
        }
        curves.push(LabeledCurve {
            label: col.clone(),
            s: s_grid.clone(),
            mean: mean_v,
            lo: lo_v,
            hi: hi_v,
        });
    }
    table.flush()?;

    write_text(&args.out_dir.join("cep.svg"), &cep_svg(&curves, &s1_obs))?;
    eprintln!("wrote {} curve(s) to {}", curves.len(), args.out_dir.display());
    Ok(())
}

/// Conditional labels carry covariate values; anything outside the
/// observed covariate range earns a warning (extrapolated curve).
fn warn_outside_observed_range(columns: &[String], data: &Dataset) {
    for col in columns {
        let Some(inner) = col.strip_prefix("gamma0[").and_then(|s| s.strip_suffix(']')) else {
            continue;
        };
        let Ok(values) = config::parse_at(inner, &data.covariate_names) else {
            continue;
        };
        for (j, v) in values.iter().enumerate() {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for rec in &data.records {
                lo = lo.min(rec.x[j]);
                hi = hi.max(rec.x[j]);
            }
            if *v < lo || *v > hi {
                eprintln!(
                    "warning: {col} conditions {} = {v} outside the observed range [{lo}, {hi}]",
                    data.covariate_names[j]
                );
            }
        }
    }
}
