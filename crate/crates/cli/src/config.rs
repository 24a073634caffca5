//! Flat key-value configuration files (`key = value`, `#` comments) and
//! the mini-grammars for priors, noise families and custom scenario
//! parameters. Command-line flags always override file values.

use crate::CliError;
use std::collections::HashMap;
use std::path::Path;
use surrocep::model::{MeanCoefs, MeanStructure, OutcomeSds};
use surrocep::priors::PriorKind;
use surrocep::sim::{CovariateGen, DmdConfig, NoiseFamily, SimSetting};

#[derive(Debug, Clone, Default)]
pub struct KeyValues(HashMap<String, String>);

impl KeyValues {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::config(format!(
                    "config line {}: expected 'key = value', got '{raw}'",
                    i + 1
                )));
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(KeyValues(map))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|s| s.as_str())
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::config(format!("config key '{key}': cannot parse '{raw}'"))
            }),
        }
    }
}

/// `flag.or(config value)`: flags win over file entries.
pub fn merge<T: std::str::FromStr>(
    flag: Option<T>,
    cfg: &KeyValues,
    key: &str,
) -> Result<Option<T>, CliError> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.parsed(key),
    }
}

/// Parses `name(arg, ...)` forms.
fn call_form(text: &str, what: &str) -> Result<(String, Vec<f64>), CliError> {
    let text = text.trim();
    let open = text
        .find('(')
        .ok_or_else(|| CliError::config(format!("{what}: expected 'name(args)', got '{text}'")))?;
    if !text.ends_with(')') {
        return Err(CliError::config(format!("{what}: missing ')' in '{text}'")));
    }
    let name = text[..open].trim().to_ascii_lowercase();
    let inner = &text[open + 1..text.len() - 1];
    let args: Result<Vec<f64>, _> = inner
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>())
        .collect();
    let args =
        args.map_err(|e| CliError::config(format!("{what}: bad number in '{text}' ({e})")))?;
    Ok((name, args))
}

/// Prior grammar: `uniform(lo,hi)`, `beta(a,b,lo,hi)`, `point(v)`,
/// `normal(mean,sd)`.
pub fn parse_prior(text: &str) -> Result<PriorKind, CliError> {
    let (name, args) = call_form(text, "prior")?;
    let kind = match (name.as_str(), args.len()) {
        ("uniform", 2) => PriorKind::UniformInterval { lo: args[0], hi: args[1] },
        ("beta", 4) => {
            PriorKind::ScaledTruncatedBeta { a: args[0], b: args[1], lo: args[2], hi: args[3] }
        }
        ("point", 1) => PriorKind::PointMass { value: args[0] },
        ("normal", 2) => PriorKind::VagueNormal { mean: args[0], sd: args[1] },
        _ => {
            return Err(CliError::config(format!(
                "unknown prior '{text}' (use uniform(lo,hi), beta(a,b,lo,hi), point(v), normal(m,sd))"
            )))
        }
    };
    kind.validate().map_err(|e| CliError::config(e.to_string()))?;
    Ok(kind)
}

/// Noise grammar: `gaussian`, `t(df)`, `gamma(shape)`.
pub fn parse_noise(text: &str) -> Result<NoiseFamily, CliError> {
    let t = text.trim().to_ascii_lowercase();
    if t == "gaussian" || t == "normal" {
        return Ok(NoiseFamily::Gaussian);
    }
    let (name, args) = call_form(&t, "noise")?;
    match (name.as_str(), args.len()) {
        ("t", 1) => Ok(NoiseFamily::StudentT { df: args[0] }),
        ("gamma", 1) => Ok(NoiseFamily::Gamma { shape: args[0] }),
        _ => Err(CliError::config(format!(
            "unknown noise '{text}' (use gaussian, t(df), gamma(shape))"
        ))),
    }
}

/// Covariate grammar: `normal(mean,sd)`, `bernoulli(p)`.
fn parse_covariate(text: &str) -> Result<CovariateGen, CliError> {
    let (name, args) = call_form(text, "covariate")?;
    match (name.as_str(), args.len()) {
        ("normal", 2) => Ok(CovariateGen::Normal { mean: args[0], sd: args[1] }),
        ("bernoulli", 1) => Ok(CovariateGen::Bernoulli { p: args[0] }),
        _ => Err(CliError::config(format!(
            "unknown covariate '{text}' (use normal(mean,sd) or bernoulli(p))"
        ))),
    }
}

/// Builds a custom scenario from generator keys: `omega1..omega6`,
/// `eps_s1/eps_t0/eps_t1` (or `eps` for all three), `theta11`, `theta_t`,
/// optional free `theta10`, `covariate`, optional `noise` and `name`.
pub fn custom_setting(kv: &KeyValues) -> Result<SimSetting, CliError> {
    let need = |key: &str| -> Result<f64, CliError> {
        kv.parsed::<f64>(key)?
            .ok_or_else(|| CliError::config(format!("custom setting: missing key '{key}'")))
    };
    let omegas: Result<Vec<f64>, CliError> =
        (1..=6).map(|i| need(&format!("omega{i}"))).collect();
    let omegas = omegas?;
    let eps_all = kv.parsed::<f64>("eps")?;
    let eps = |key: &str| -> Result<f64, CliError> {
        match kv.parsed::<f64>(key)? {
            Some(v) => Ok(v),
            None => eps_all
                .ok_or_else(|| CliError::config(format!("custom setting: missing '{key}' or 'eps'"))),
        }
    };
    let theta11 = need("theta11")?;
    let theta_t = need("theta_t")?;
    let corr = match kv.parsed::<f64>("theta10")? {
        Some(theta10) => surrocep::model::CorrelationState::Free { theta10, theta11, theta_t },
        None => surrocep::model::CorrelationState::ConditionalIndependence { theta11, theta_t },
    };
    let covariate = parse_covariate(
        kv.get("covariate")
            .ok_or_else(|| CliError::config("custom setting: missing 'covariate'".to_string()))?,
    )?;
    let noise = match kv.get("noise") {
        Some(text) => parse_noise(text)?,
        None => NoiseFamily::Gaussian,
    };
    let setting = SimSetting {
        name: kv.get("name").unwrap_or("custom").to_string(),
        mean: MeanStructure {
            s1: MeanCoefs { intercept: omegas[0], slopes: vec![omegas[1]] },
            t0: MeanCoefs { intercept: omegas[2], slopes: vec![omegas[3]] },
            t1: MeanCoefs { intercept: omegas[4], slopes: vec![omegas[5]] },
        },
        sds: OutcomeSds { s1: eps("eps_s1")?, t0: eps("eps_t0")?, t1: eps("eps_t1")? },
        corr,
        covariates: covariate,
        noise,
        reference_theta10: None,
        reference_gammas: Vec::new(),
    };
    setting.validate().map_err(|e| CliError::config(e.to_string()))?;
    Ok(setting)
}

/// Overrides for the muscular-dystrophy-style scenario: `age_lo`,
/// `age_hi`, `base_mean`, `base_sd`, per-outcome `s1_intercept`,
/// `s1_age`, `s1_age2`, `s1_base` (same for `t0`, `t1`), `sd_s1`,
/// `sd_t0`, `sd_t1`, `theta11`, `theta_t`.
pub fn dmd_config(kv: &KeyValues) -> Result<DmdConfig, CliError> {
    let mut config = DmdConfig::default();
    let set = |target: &mut f64, key: &str| -> Result<(), CliError> {
        if let Some(v) = kv.parsed::<f64>(key)? {
            *target = v;
        }
        Ok(())
    };
    set(&mut config.age_lo, "age_lo")?;
    set(&mut config.age_hi, "age_hi")?;
    set(&mut config.base_mean, "base_mean")?;
    set(&mut config.base_sd, "base_sd")?;
    for (prefix, coefs) in [
        ("s1", &mut config.s1),
        ("t0", &mut config.t0),
        ("t1", &mut config.t1),
    ] {
        set(&mut coefs.intercept, &format!("{prefix}_intercept"))?;
        set(&mut coefs.slopes[0], &format!("{prefix}_age"))?;
        set(&mut coefs.slopes[1], &format!("{prefix}_age2"))?;
        set(&mut coefs.slopes[2], &format!("{prefix}_base"))?;
    }
    set(&mut config.sds.s1, "sd_s1")?;
    set(&mut config.sds.t0, "sd_t0")?;
    set(&mut config.sds.t1, "sd_t1")?;
    set(&mut config.theta11, "theta11")?;
    set(&mut config.theta_t, "theta_t")?;
    Ok(config)
}

/// Parses one `--at` argument: comma-separated `name=value` pairs that
/// must cover exactly the dataset's covariate columns.
pub fn parse_at(text: &str, covariate_names: &[String]) -> Result<Vec<f64>, CliError> {
    let mut values: Vec<Option<f64>> = vec![None; covariate_names.len()];
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (name, value) = part.split_once('=').ok_or_else(|| {
            CliError::config(format!("--at entry '{part}': expected name=value"))
        })?;
        let idx = covariate_names
            .iter()
            .position(|n| n == name.trim())
            .ok_or_else(|| {
                CliError::config(format!(
                    "--at names a covariate '{}' not in the data (have: {})",
                    name.trim(),
                    covariate_names.join(", ")
                ))
            })?;
        values[idx] = Some(value.trim().parse::<f64>().map_err(|e| {
            CliError::config(format!("--at entry '{part}': bad value ({e})"))
        })?);
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| {
                CliError::config(format!("--at is missing covariate '{}'", covariate_names[i]))
            })
        })
        .collect()
}
