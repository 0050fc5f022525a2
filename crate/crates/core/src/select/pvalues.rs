use statrs::function::gamma::checked_gamma_ur;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Per-feature χ² statistics and their raw P-values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub statistic: Vec<f64>,
    pub p_raw: Vec<f64>,
    pub dof: usize,
}

/// Upper tail `P[χ²_dof > x]`, i.e. the regularized incomplete gamma
/// function `Q(dof / 2, x / 2)`.
pub fn chi2_sf(x: f64, dof: usize) -> Result<f64> {
    if dof < 1 {
        return Err(Error::arg(
            "chi-squared needs at least one degree of freedom",
        ));
    }
    if !(x >= 0.0) {
        return Err(Error::arg(format!(
            "chi-squared statistic must be >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    checked_gamma_ur(dof as f64 / 2.0, x / 2.0)
        .map(|q| q.clamp(0.0, 1.0))
        .map_err(|e| Error::Internal(format!("incomplete gamma: {e}")))
}

/// Benjamini–Hochberg step-up adjustment, returned in input order.
pub fn bh_adjust(p: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::arg(format!("P-value {bad} outside [0, 1]")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    let mut running = 1.0_f64;
    for rank in (0..m).rev() {
        let idx = order[rank];
        running = running.min(p[idx] * m as f64 / (rank + 1) as f64);
        out[idx] = running;
    }
    Ok(out)
}

fn check_components(components: &[usize], available: usize) -> Result<()> {
    if components.is_empty() {
        return Err(Error::arg("at least one component is required"));
    }
    for (n, &c) in components.iter().enumerate() {
        if c >= available {
            return Err(Error::arg(format!(
                "component {} out of range (only {available} available)",
                c + 1
            )));
        }
        if components[..n].contains(&c) {
            return Err(Error::arg(format!("component {} listed twice", c + 1)));
        }
    }
    Ok(())
}

fn finish(statistic: Vec<f64>, dof: usize) -> Result<FeatureStats> {
    let p_raw = statistic
        .iter()
        .map(|&s| chi2_sf(s, dof))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureStats {
        statistic,
        p_raw,
        dof,
    })
}

/// `Σ_{l ∈ components} m[l, d]² / S[l, l]` for every feature `d`, with
/// `|components|` degrees of freedom. Components are 0-based row indices.
pub fn btud_pvalues(means: &Matrix, cov: &Matrix, components: &[usize]) -> Result<FeatureStats> {
    check_components(components, means.rows())?;
    if cov.rows() != means.rows() || cov.cols() != means.rows() {
        return Err(Error::dim(format!(
            "covariance is {}x{}, expected {}x{}",
            cov.rows(),
            cov.cols(),
            means.rows(),
            means.rows()
        )));
    }
    for &c in components {
        let v = cov[(c, c)];
        if !(v > 0.0) {
            return Err(Error::DegenerateVariance {
                component: c + 1,
                value: v,
            });
        }
    }
    let statistic = (0..means.cols())
        .map(|d| {
            components
                .iter()
                .map(|&c| means[(c, d)] * means[(c, d)] / cov[(c, c)])
                .sum()
        })
        .collect();
    finish(statistic, components.len())
}

/// `Σ_{l ∈ components} (u[l, d] / σ_l)²` for every feature `d`; `sigma[n]`
/// belongs to `components[n]`.
pub fn td_pvalues(u: &Matrix, sigma: &[f64], components: &[usize]) -> Result<FeatureStats> {
    check_components(components, u.rows())?;
    if sigma.len() != components.len() {
        return Err(Error::arg(format!(
            "{} sigma values for {} components",
            sigma.len(),
            components.len()
        )));
    }
    if let Some(bad) = sigma.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::arg(format!(
            "sigma must be positive and finite, got {bad}"
        )));
    }
    let statistic = (0..u.cols())
        .map(|d| {
            components
                .iter()
                .zip(sigma)
                .map(|(&c, s)| {
                    let z = u[(c, d)] / s;
                    z * z
                })
                .sum()
        })
        .collect();
    finish(statistic, components.len())
}
