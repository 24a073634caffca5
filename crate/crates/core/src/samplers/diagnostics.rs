//! Convergence checks on retained draws: split-chain potential scale
//! reduction per recorded column, flagging anything above 1.1.

use super::{PosteriorDraws, SamplerError};
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamConvergence {
    pub name: String,
    pub r_hat: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub params: Vec<ParamConvergence>,
}

impl ConvergenceReport {
    pub fn any_flagged(&self) -> bool {
        self.params.iter().any(|p| p.flagged)
    }
}

const R_HAT_FLAG: f64 = 1.1;

/// Split-chain R-hat for every recorded column. Needs at least 100
/// retained draws. A column that never moves at all reports 1.0 (nothing
/// to diagnose); a column whose halves disagree while barely moving
/// within them reports infinity and is flagged.
pub fn convergence_report(draws: &PosteriorDraws) -> Result<ConvergenceReport, SamplerError> {
    if draws.len() < 100 {
        return Err(SamplerError::TooFewDraws { needed: 100, got: draws.len() });
    }
    let params = draws
        .names
        .iter()
        .map(|name| {
            let col = draws.column(name).expect("column exists");
            let r_hat = split_r_hat(&col);
            ParamConvergence {
                name: name.clone(),
                flagged: !(r_hat <= R_HAT_FLAG),
                r_hat,
            }
        })
        .collect();
    Ok(ConvergenceReport { params })
}

/// Split one chain into halves and compute the classic potential scale
/// reduction over the two half-chains.
pub fn split_r_hat(chain: &[f64]) -> f64 {
    let mid = chain.len() / 2;
    let halves = [&chain[..mid], &chain[mid..mid * 2]];
    let n = mid as f64;
    let means: Vec<f64> = halves.iter().map(|h| stats::mean(h)).collect();
    let grand = 0.5 * (means[0] + means[1]);
    let b = n * ((means[0] - grand).powi(2) + (means[1] - grand).powi(2));
    let w = 0.5
        * halves
            .iter()
            .map(|h| {
                let m = stats::mean(h);
                h.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
            })
            .sum::<f64>();
    if w <= 0.0 {
        // Flat within both halves: constant chain if the halves agree.
        return if b <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_hat = (n - 1.0) / n * w + b / n;
    (var_hat / w).sqrt()
}
