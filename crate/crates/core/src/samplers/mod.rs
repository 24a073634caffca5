//! The two estimation algorithms and their shared plumbing.
//!
//! Both algorithms decompose the outcome covariance as `Sigma = D R D`
//! (standard deviations times a correlation matrix) and draw scalar
//! parameters one at a time: mean coefficients from their conjugate normal
//! conditionals, standard deviations and identified correlations by griddy
//! Gibbs on a bounded grid.
//!
//! - [`run_imputation_mcmc`]: full data augmentation. Each sweep imputes
//!   the missing potential outcomes from their Gaussian conditionals and
//!   updates every parameter against the completed-data likelihood.
//! - [`run_observed_data_mcmc`]: fits the treated-arm bivariate model and
//!   the control-arm univariate model on observed data only, then draws
//!   the nonidentified correlations straight from their priors (subject to
//!   positive definiteness).
//!
//! Chains are strictly sequential and fully determined by
//! `(seed, config, data)`.

mod common;
mod diagnostics;
mod griddy;
mod imputation;
mod observed;

pub use common::{default_gamma_at, gamma_label as gamma_label_for};
pub use diagnostics::{convergence_report, split_r_hat, ConvergenceReport, ParamConvergence};
pub use griddy::griddy_gibbs_draw;
pub use imputation::run_imputation_mcmc;
pub use observed::{run_observed_data_mcmc, sensitivity_scan, SensitivityRow, ThetaTSetting};

use crate::data::DataError;
use crate::model::ModelError;
use crate::mvn::MvnError;
use crate::priors::PriorError;
use crate::stats;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("more than 99% of grid mass sits in the outermost cells; the constraint is nearly degenerate")]
    AllMassAtBoundary,
    #[error("log target not finite on the evaluation grid")]
    NonFiniteTarget,
    #[error("empty or inverted support ({0}, {1})")]
    InvalidSupport(f64, f64),
    #[error("chain diverged: {0}")]
    ChainDiverged(String),
    #[error("gave up after 10000 consecutive positive-definiteness rejections")]
    RejectionStarvation,
    #[error("need at least {needed} retained draws, got {got}")]
    TooFewDraws { needed: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mvn(#[from] MvnError),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Grid sizes for griddy Gibbs: a coarse pass over the whole support, then
/// a fine pass over the smallest contiguous region holding `fine_fraction`
/// of the coarse mass.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub coarse: usize,
    pub fine: usize,
    pub fine_fraction: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { coarse: 100, fine: 100, fine_fraction: 0.8 }
    }
}

/// Chain configuration shared by both algorithms.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub grid: GridSpec,
    /// Covariate values at which conditional `gamma0(x)` draws are
    /// recorded (conditional designs). Empty means: both levels of a
    /// binary covariate, otherwise the covariate sample mean.
    pub gamma_at: Vec<Vec<f64>>,
    /// Record marginalized `gamma0`/`gamma1` draws for conditional designs
    /// by averaging over the empirical covariate distribution.
    pub marginal_gammas: bool,
    /// For the imputation algorithm: keep every k-th retained sweep of
    /// imputed missing outcomes.
    pub store_imputations: Option<usize>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_iter: 3000,
            burn_in: 500,
            seed: 0,
            grid: GridSpec::default(),
            gamma_at: Vec::new(),
            marginal_gammas: true,
            store_imputations: None,
        }
    }
}

impl ChainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.burn_in >= self.n_iter {
            return Err(SamplerError::ChainDiverged(format!(
                "burn-in {} must be below iteration count {}",
                self.burn_in, self.n_iter
            )));
        }
        if self.grid.coarse < 10 || self.grid.fine < 10 {
            return Err(SamplerError::ChainDiverged(
                "grids need at least 10 points".into(),
            ));
        }
        if !(self.grid.fine_fraction > 0.0 && self.grid.fine_fraction <= 1.0) {
            return Err(SamplerError::ChainDiverged(
                "fine_fraction must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.n_iter - self.burn_in
    }
}

/// Thinned sweeps of imputed missing outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedDraws {
    /// Column labels of the imputed slots, e.g. `s1[17]` for record id 17.
    pub names: Vec<String>,
    pub iterations: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

/// Retained draws: a named column per parameter and derived quantity, one
/// row per kept iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub imputed: Option<ImputedDraws>,
}

/// Posterior summary of one recorded column.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn summary(&self, name: &str) -> Option<ParamSummary> {
        let col = self.column(name)?;
        Some(ParamSummary {
            name: name.to_string(),
            mean: stats::mean(&col),
            sd: stats::sd(&col),
            q025: stats::quantile(&col, 0.025),
            q975: stats::quantile(&col, 0.975),
        })
    }

    pub fn summaries(&self) -> Vec<ParamSummary> {
        self.names
            .iter()
            .map(|n| self.summary(n).expect("column exists"))
            .collect()
    }

    /// Delimited export: header of parameter names, one row per retained
    /// iteration. Names containing the delimiter are quoted.
    pub fn write_delimited(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.names).map_err(std::io::Error::other)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|v| v.to_string()))
                .map_err(std::io::Error::other)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_delimited(r: impl std::io::Read) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(r);
        let names: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row: Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
            rows.push(row.map_err(|e| DataError::BadRecord {
                row: i + 2,
                message: format!("bad draw value: {e}"),
            })?);
        }
        Ok(PosteriorDraws { names, rows, imputed: None })
    }
}
