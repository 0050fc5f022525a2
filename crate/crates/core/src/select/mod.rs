//! Unsupervised feature selection from decomposition outputs.
//!
//! Each feature gets a χ² statistic built from its factor loadings, either
//! scaled by posterior variances ([`btud_pvalues`]) or by an optimized null
//! σ ([`td_pvalues`] with [`optimize_sigma`]). The raw P-values are
//! BH-adjusted and thresholded by [`select_features`].

mod pvalues;
mod sigma;
mod svd;

pub use pvalues::{bh_adjust, btud_pvalues, chi2_sf, td_pvalues, FeatureStats};
pub use sigma::{histogram_spread, optimize_sigma, SigmaFit, SigmaOptions};
pub use svd::{svd_select, SvdMethod, SvdSelection};

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{fmt_f64, Tensor3};

/// Default BH threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub statistic: Vec<f64>,
    pub p_raw: Vec<f64>,
    pub p_adjusted: Vec<f64>,
    pub selected: Vec<bool>,
    pub dof: usize,
    pub threshold: f64,
}

impl SelectionResult {
    pub fn len(&self) -> usize {
        self.p_raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_raw.is_empty()
    }

    pub fn selected_count(&self) -> usize {
        self.selected.iter().filter(|s| **s).count()
    }

    /// 0-based indices of the selected features.
    pub fn selected_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.selected[i]).collect()
    }
}

/// BH-adjusts `stats.p_raw` and marks features with adjusted P at or below
/// `threshold`.
pub fn select_features(stats: FeatureStats, threshold: f64) -> Result<SelectionResult> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::arg(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    if stats.statistic.len() != stats.p_raw.len() {
        return Err(Error::dim("statistic and P-value vectors differ in length"));
    }
    let p_adjusted = bh_adjust(&stats.p_raw)?;
    let selected = p_adjusted.iter().map(|q| *q <= threshold).collect();
    Ok(SelectionResult {
        statistic: stats.statistic,
        p_raw: stats.p_raw,
        p_adjusted,
        selected,
        dof: stats.dof,
        threshold,
    })
}

/// Which `(l2, l3)` core slices [`rank_components_by_core`] looks at. An
/// empty list means every index of that mode. Indices are 0-based.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoreFilter {
    pub mode2: Vec<usize>,
    pub mode3: Vec<usize>,
}

/// Orders mode-1 components by `max |G(l1, l2, l3)|` over the filtered
/// `(l2, l3)`, largest first; ties keep the smaller `l1` first.
pub fn rank_components_by_core(core: &Tensor3, filter: &CoreFilter) -> Result<Vec<(usize, f64)>> {
    let (l1, l2, l3) = core.dims();
    let pick = |given: &[usize], n: usize, mode: usize| -> Result<Vec<usize>> {
        if let Some(bad) = given.iter().find(|&&v| v >= n) {
            return Err(Error::arg(format!(
                "index {} out of range for mode {mode} (rank {n})",
                bad + 1
            )));
        }
        Ok(if given.is_empty() {
            (0..n).collect()
        } else {
            given.to_vec()
        })
    };
    let s2 = pick(&filter.mode2, l2, 2)?;
    let s3 = pick(&filter.mode3, l3, 3)?;
    let mut out: Vec<(usize, f64)> = (0..l1)
        .map(|a| {
            let w = s2
                .iter()
                .flat_map(|&b| s3.iter().map(move |&c| (b, c)))
                .map(|(b, c)| core.get(a, b, c).abs())
                .fold(0.0, f64::max);
            (a, w)
        })
        .collect();
    out.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    Ok(out)
}

const CSV_HEADER: &str = "feature_index,statistic,p_raw,p_adjusted,selected";

/// Writes one row per feature; `feature_index` is 1-based.
pub fn write_selection_csv<W: Write>(mut w: W, r: &SelectionResult) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for i in 0..r.len() {
        writeln!(
            w,
            "{},{},{},{},{}",
            i + 1,
            fmt_f64(r.statistic[i]),
            fmt_f64(r.p_raw[i]),
            fmt_f64(r.p_adjusted[i]),
            u8::from(r.selected[i])
        )?;
    }
    Ok(())
}

/// Reads the `selected` column of a file produced by [`write_selection_csv`].
pub fn read_selection_mask<R: Read>(r: R) -> Result<Vec<bool>> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let columns: Vec<&str> = header.trim().split(',').collect();
    let col = columns
        .iter()
        .position(|c| *c == "selected")
        .ok_or_else(|| Error::Parse("selection CSV has no `selected` column".into()))?;
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let field = line
            .split(',')
            .nth(col)
            .ok_or_else(|| Error::Parse(format!("line {} is missing fields", n + 2)))?;
        out.push(parse_flag(field.trim(), n + 2)?);
    }
    Ok(out)
}

pub(crate) fn parse_flag(field: &str, line: usize) -> Result<bool> {
    match field {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(Error::Parse(format!(
            "line {line}: expected 0/1, got `{other}`"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(p: &[f64]) -> FeatureStats {
        FeatureStats {
            statistic: vec![0.0; p.len()],
            p_raw: p.to_vec(),
            dof: 1,
        }
    }

    #[test]
    fn selection_examples() {
        let none = select_features(stats(&[1.0, 1.0, 1.0]), 0.05).unwrap();
        assert_eq!(none.selected_count(), 0);
        let r = select_features(stats(&[1e-6, 0.5, 0.9]), 0.05).unwrap();
        assert_eq!(r.selected, vec![true, false, false]);
        assert!((r.p_adjusted[0] - 3e-6).abs() < 1e-18);
        let strict = select_features(stats(&[0.001, 0.02, 0.2, 0.011]), 0.01).unwrap();
        let loose = select_features(stats(&[0.001, 0.02, 0.2, 0.011]), 0.05).unwrap();
        for i in 0..4 {
            assert!(!strict.selected[i] || loose.selected[i]);
        }
        assert!(select_features(stats(&[0.1]), 0.0).is_err());
        assert!(select_features(stats(&[0.1]), 1.0).is_err());
    }

    #[test]
    fn core_ranking() {
        let mut g = Tensor3::zeros((3, 2, 2));
        g.set(1, 0, 0, 5.0);
        let filter = CoreFilter {
            mode2: vec![0],
            mode3: vec![0],
        };
        let r = rank_components_by_core(&g, &filter).unwrap();
        assert_eq!(r, vec![(1, 5.0), (0, 0.0), (2, 0.0)]);

        let flat = Tensor3::from_fn((3, 1, 1), |_, _, _| -1.0);
        let r = rank_components_by_core(&flat, &CoreFilter::default()).unwrap();
        assert_eq!(r.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 1, 2]);

        let bad = CoreFilter {
            mode2: vec![2],
            mode3: vec![],
        };
        assert!(rank_components_by_core(&g, &bad).is_err());
    }

    #[test]
    fn core_ranking_matches_scan() {
        let g = Tensor3::from_fn((4, 3, 3), |a, b, c| {
            ((a * 7 + b * 3 + c * 5) % 11) as f64 - 5.0
        });
        let filter = CoreFilter {
            mode2: vec![0, 2],
            mode3: vec![1],
        };
        let r = rank_components_by_core(&g, &filter).unwrap();
        for (a, w) in &r {
            let mut best: f64 = 0.0;
            for b in [0, 2] {
                best = best.max(g.get(*a, b, 1).abs());
            }
            assert_eq!(*w, best);
        }
        for pair in r.windows(2) {
            assert!(pair[0].1 > pair[1].1 || (pair[0].1 == pair[1].1 && pair[0].0 < pair[1].0));
        }
    }

    #[test]
    fn csv_round_trip() {
        let r = select_features(stats(&[1e-6, 0.5, 0.9]), 0.05).unwrap();
        let mut buf = Vec::new();
        write_selection_csv(&mut buf, &r).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(read_selection_mask(&buf[..]).unwrap(), r.selected);
        assert!(read_selection_mask("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_selection_mask("selected\n7\n".as_bytes()).is_err());
    }
}
