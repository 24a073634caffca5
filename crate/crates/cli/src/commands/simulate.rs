//! `surrocep simulate`: write a masked trial dataset (and optionally the
//! full counterfactual table) for a built-in or custom scenario.

use super::{ensure_out_dir, load_config};
use crate::config::{self, KeyValues};
use crate::{resolve_seed, CliError};
use clap::Args;
use std::path::PathBuf;
use surrocep::sim::{self, SimSetting};

#[derive(Args)]
pub struct SimulateArgs {
    /// Built-in setting name (A, B, C, D, E, DMD).
    #[arg(long)]
    pub setting: Option<String>,
    /// Custom generator parameter file (key = value).
    #[arg(long, conflicts_with = "setting")]
    pub params: Option<PathBuf>,
    /// Subjects in total, half per arm.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Outcome noise override: gaussian, t(df) or gamma(shape).
    #[arg(long)]
    pub noise: Option<String>,
    /// Also write the complete counterfactual table (oracle use only).
    #[arg(long)]
    pub full: bool,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Flat key = value defaults; flags override.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Resolves a setting from `--setting`, a custom `--params` file, or the
/// config file's `setting`/custom keys.
pub fn resolve_setting(
    setting: &Option<String>,
    params: &Option<PathBuf>,
    cfg: &KeyValues,
) -> Result<SimSetting, CliError> {
    if let Some(path) = params {
        let kv = KeyValues::load(path)?;
        return build_custom(&kv);
    }
    let name = setting
        .clone()
        .or_else(|| cfg.get("setting").map(str::to_string));
    match name {
        Some(name) => {
            if name.eq_ignore_ascii_case("custom") {
                return build_custom(cfg);
            }
            let mut s = sim::preset(&name).map_err(|_| {
                CliError::config(format!(
                    "unknown setting '{name}'; valid names: {}",
                    sim::preset_names().join(", ")
                ))
            })?;
            if name.eq_ignore_ascii_case("dmd") {
                // Allow scenario overrides from the same config file.
                let dmd = config::dmd_config(cfg)?;
                s = sim::dmd_scenario(&dmd)?;
            }
            Ok(s)
        }
        None => Err(CliError::config(
            "no scenario: pass --setting or --params (or 'setting' in the config file)",
        )),
    }
}

fn build_custom(kv: &KeyValues) -> Result<SimSetting, CliError> {
    if kv.get("setting").map(|s| s.eq_ignore_ascii_case("dmd")) == Some(true) {
        let dmd = config::dmd_config(kv)?;
        return Ok(sim::dmd_scenario(&dmd)?);
    }
    config::custom_setting(kv)
}

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let mut setting = resolve_setting(&args.setting, &args.params, &cfg)?;
    if let Some(noise) = args.noise.as_deref().or_else(|| cfg.get("noise")) {
        setting = setting.with_noise(config::parse_noise(noise)?);
    }
    let n = config::merge(args.n, &cfg, "n")?.unwrap_or(100);
    let seed = resolve_seed(config::merge(args.seed, &cfg, "seed")?);

    let complete = sim::generate(&setting, n, seed)?;
    let masked = complete.mask();

    ensure_out_dir(&args.out_dir)?;
    masked.write_path(args.out_dir.join("trial.csv"))?;
    if args.full {
        let mut f = std::fs::File::create(args.out_dir.join("counterfactuals.csv"))?;
        complete.write_to(&mut f).map_err(CliError::from)?;
    }
    eprintln!(
        "wrote {} records for setting {} to {}",
        masked.records.len(),
        setting.name,
        args.out_dir.display()
    );
    Ok(())
}
