//! Griddy Gibbs: draw a scalar from an unnormalized log target on a
//! bounded support by evaluating it on a grid, refining the high-density
//! region, and inverting the resulting piecewise-constant CDF.

use super::{GridSpec, SamplerError};
use rand::Rng;

/// One scalar draw.
///
/// The coarse pass evaluates `log_target` at `grid.coarse` cell midpoints
/// over `support` and normalizes with log-sum-exp. The smallest set of
/// cells whose probability reaches `grid.fine_fraction` is expanded to a
/// contiguous interval and re-evaluated with `grid.fine` cells; its
/// refined cells replace the coarse ones, carrying the same total mass, so
/// the tails outside the refined region keep their coarse-grid
/// probability. The draw inverts the combined CDF with uniform jitter
/// inside the selected cell.
///
/// `-inf` target values are allowed (zero density); `NaN` or `+inf`
/// anywhere, or `-inf` everywhere, is an error.
pub fn griddy_gibbs_draw(
    log_target: impl Fn(f64) -> f64,
    support: (f64, f64),
    grid: &GridSpec,
    rng: &mut impl Rng,
) -> Result<f64, SamplerError> {
    let (lo, hi) = support;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(SamplerError::InvalidSupport(lo, hi));
    }

    let coarse = evaluate_cells(&log_target, lo, hi, grid.coarse)?;
    if coarse.probs[0] + coarse.probs[grid.coarse - 1] > 0.99 {
        return Err(SamplerError::AllMassAtBoundary);
    }

    // Smallest prefix of probability-sorted cells reaching the refinement
    // mass, expanded to a contiguous index range.
    let mut order: Vec<usize> = (0..grid.coarse).collect();
    order.sort_by(|&a, &b| coarse.probs[b].partial_cmp(&coarse.probs[a]).unwrap());
    let mut cum = 0.0;
    let mut i_min = usize::MAX;
    let mut i_max = 0;
    for &idx in &order {
        cum += coarse.probs[idx];
        i_min = i_min.min(idx);
        i_max = i_max.max(idx);
        if cum >= grid.fine_fraction {
            break;
        }
    }
    let region_mass: f64 = coarse.probs[i_min..=i_max].iter().sum();
    let region_lo = lo + i_min as f64 * coarse.width;
    let region_hi = lo + (i_max + 1) as f64 * coarse.width;

    // Assemble the final piecewise-constant density in x-order: coarse
    // cells below the region, fine cells inside it, coarse cells above.
    let mut cells: Vec<(f64, f64, f64)> = Vec::with_capacity(grid.coarse + grid.fine);
    for i in 0..i_min {
        let a = lo + i as f64 * coarse.width;
        cells.push((a, a + coarse.width, coarse.probs[i]));
    }
    match evaluate_cells(&log_target, region_lo, region_hi, grid.fine) {
        Ok(fine) => {
            for j in 0..grid.fine {
                let a = region_lo + j as f64 * fine.width;
                cells.push((a, a + fine.width, fine.probs[j] * region_mass));
            }
        }
        // The fine grid can miss a sub-cell spike the coarse midpoints
        // caught; keep the coarse cells for the region in that case.
        Err(SamplerError::NonFiniteTarget) => {
            for i in i_min..=i_max {
                let a = lo + i as f64 * coarse.width;
                cells.push((a, a + coarse.width, coarse.probs[i]));
            }
        }
        Err(e) => return Err(e),
    }
    for i in (i_max + 1)..grid.coarse {
        let a = lo + i as f64 * coarse.width;
        cells.push((a, a + coarse.width, coarse.probs[i]));
    }

    // Inverse CDF with uniform jitter within the selected cell.
    let total: f64 = cells.iter().map(|c| c.2).sum();
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for &(a, b, p) in &cells {
        if p <= 0.0 {
            continue;
        }
        if acc + p >= u {
            let frac = ((u - acc) / p).clamp(0.0, 1.0);
            let x = a + frac * (b - a);
            // Keep the draw strictly interior.
            return Ok(x.clamp(lo + 0.25 * f64::EPSILON * (hi - lo), hi - 0.25 * f64::EPSILON * (hi - lo)));
        }
        acc += p;
    }
    // Rounding pushed u past the accumulated total; take the last
    // positive-mass cell midpoint.
    let last = cells.iter().rev().find(|c| c.2 > 0.0).expect("positive mass");
    Ok(0.5 * (last.0 + last.1))
}

struct CellEval {
    width: f64,
    probs: Vec<f64>,
}

fn evaluate_cells(
    log_target: &impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<CellEval, SamplerError> {
    let width = (hi - lo) / n as f64;
    let mut logs = Vec::with_capacity(n);
    let mut max_log = f64::NEG_INFINITY;
    for i in 0..n {
        let x = lo + (i as f64 + 0.5) * width;
        let v = log_target(x);
        if v.is_nan() || v == f64::INFINITY {
            return Err(SamplerError::NonFiniteTarget);
        }
        max_log = max_log.max(v);
        logs.push(v);
    }
    if max_log == f64::NEG_INFINITY {
        return Err(SamplerError::NonFiniteTarget);
    }
    let mut probs: Vec<f64> = logs.iter().map(|v| (v - max_log).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(CellEval { width, probs })
}
