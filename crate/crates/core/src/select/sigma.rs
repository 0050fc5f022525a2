//! Choice of the null standard deviation for factor-based P-values.
//!
//! For a good σ, features that are not outliers have uniformly distributed
//! P-values, so the histogram of `1 - P` over them is flat. The optimizer
//! scans σ and keeps the value whose histogram has the smallest spread.

use serde::{Deserialize, Serialize};

use super::pvalues::{bh_adjust, td_pvalues};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Search settings for [`optimize_sigma`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaOptions {
    /// Histogram bin count `S`.
    pub bins: usize,
    /// Features with BH-adjusted P at or below this are left out of the histogram.
    pub exclusion_threshold: f64,
    /// Number of log-spaced candidates.
    pub grid_points: usize,
    /// Candidates span `[low * s, high * s]` with `s` the pooled sample SD.
    pub grid_low: f64,
    pub grid_high: f64,
    /// After the shared scan, rescan each component's σ with the others held fixed.
    pub per_component: bool,
}

impl Default for SigmaOptions {
    fn default() -> Self {
        Self {
            bins: 100,
            exclusion_threshold: 0.01,
            grid_points: 101,
            grid_low: 0.2,
            grid_high: 5.0,
            per_component: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaFit {
    /// One value per requested component, in the order given.
    pub sigma: Vec<f64>,
    /// Spread of the histogram at the chosen σ.
    pub sigma_h: f64,
    pub bins: usize,
    pub exclusion_threshold: f64,
    /// Features that entered the histogram at the chosen σ.
    pub retained: usize,
}

/// Standard deviation of bin counts of `1 - P` over the features whose
/// adjusted P exceeds `exclusion`, or `None` if every feature is excluded.
pub fn histogram_spread(
    p_raw: &[f64],
    bins: usize,
    exclusion: f64,
) -> Result<Option<(f64, usize)>> {
    let adjusted = bh_adjust(p_raw)?;
    let mut counts = vec![0usize; bins];
    let mut retained = 0;
    for (p, q) in p_raw.iter().zip(&adjusted) {
        if *q <= exclusion {
            continue;
        }
        let v = 1.0 - p;
        let bin = ((v * bins as f64) as usize).min(bins - 1);
        counts[bin] += 1;
        retained += 1;
    }
    if retained == 0 {
        return Ok(None);
    }
    let mean = retained as f64 / bins as f64;
    let var = counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(2))
        .sum::<f64>()
        / bins as f64;
    Ok(Some((var.sqrt(), retained)))
}

fn grid(center: f64, opts: &SigmaOptions) -> Vec<f64> {
    let (lo, hi) = (
        (opts.grid_low * center).ln(),
        (opts.grid_high * center).ln(),
    );
    let n = opts.grid_points;
    if n == 1 {
        return vec![(lo.exp() * hi.exp()).sqrt()];
    }
    (0..n)
        .map(|g| (lo + (hi - lo) * g as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Returns `(sigma_h, retained)` for the best candidate, preferring the
/// smaller σ on ties, or `None` if every candidate was skipped.
fn scan(
    candidates: &[f64],
    mut evaluate: impl FnMut(f64) -> Result<Option<(f64, usize)>>,
) -> Result<Option<(f64, f64, usize)>> {
    let mut best: Option<(f64, f64, usize)> = None;
    for &s in candidates {
        if let Some((spread, kept)) = evaluate(s)? {
            if best.map_or(true, |(_, b, _)| spread < b) {
                best = Some((s, spread, kept));
            }
        }
    }
    Ok(best)
}

/// Picks σ for [`td_pvalues`](super::td_pvalues) on rows `components` of `u`.
pub fn optimize_sigma(u: &Matrix, components: &[usize], opts: &SigmaOptions) -> Result<SigmaFit> {
    if opts.bins < 2 {
        return Err(Error::arg(format!(
            "need at least 2 bins, got {}",
            opts.bins
        )));
    }
    if opts.grid_points < 1 || !(opts.grid_low > 0.0) || !(opts.grid_high >= opts.grid_low) {
        return Err(Error::arg(
            "sigma grid must be non-empty with 0 < low <= high",
        ));
    }
    if !(opts.exclusion_threshold >= 0.0 && opts.exclusion_threshold < 1.0) {
        return Err(Error::arg("exclusion threshold must lie in [0, 1)"));
    }
    if components.iter().any(|&c| c >= u.rows()) || components.is_empty() {
        return Err(Error::arg("components must be non-empty and within range"));
    }
    let pooled: Vec<f64> = components
        .iter()
        .flat_map(|&c| u.row(c).iter().copied())
        .collect();
    let n = pooled.len() as f64;
    let mean = pooled.iter().sum::<f64>() / n;
    let sd = if pooled.len() > 1 {
        (pooled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::OptimizationFailed(
            "pooled factor entries have zero spread".into(),
        ));
    }
    let candidates = grid(sd, opts);
    let k = components.len();
    let objective = |sigma: &[f64]| -> Result<Option<(f64, usize)>> {
        let stats = td_pvalues(u, sigma, components)?;
        histogram_spread(&stats.p_raw, opts.bins, opts.exclusion_threshold)
    };
    let Some((shared, mut spread, mut retained)) = scan(&candidates, |s| objective(&vec![s; k]))?
    else {
        return Err(Error::OptimizationFailed(
            "every candidate sigma excluded all features".into(),
        ));
    };
    let mut sigma = vec![shared; k];
    if opts.per_component && k > 1 {
        for slot in 0..k {
            let mut trial = sigma.clone();
            if let Some((s, h, kept)) = scan(&candidates, |s| {
                trial[slot] = s;
                objective(&trial)
            })? {
                if h < spread {
                    sigma[slot] = s;
                    spread = h;
                    retained = kept;
                }
            }
        }
    }
    Ok(SigmaFit {
        sigma,
        sigma_h: spread,
        bins: opts.bins,
        exclusion_threshold: opts.exclusion_threshold,
        retained,
    })
}
