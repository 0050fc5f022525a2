//! Seeded generators for the benchmark data sets.

mod gcm;
mod rng;

pub use gcm::{simulate_rcs_gcm, GcmParams};
pub use rng::{standard_normal, stream, uniform};

use std::io::{BufRead, BufReader, Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor3};

/// Gaussian tensor with a shifted block: `x_ijk ~ N(mu, 1)` for
/// `i < n1, j < m/2, k < k/2` (0-based) and `N(0, 1)` elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticBlockParams {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub n1: usize,
    pub mu: f64,
    pub seed: u64,
}

impl Default for SyntheticBlockParams {
    fn default() -> Self {
        Self {
            n: 1000,
            m: 20,
            k: 20,
            n1: 10,
            mu: 1.0,
            seed: 0,
        }
    }
}

/// Rows `i < n1` follow `sin(2π j / period + ε_i)` for `j = 1..=m` with a
/// per-row phase `ε_i ~ N(0, 1)`; the remaining rows are white noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SinusoidParams {
    pub n: usize,
    pub m: usize,
    pub n1: usize,
    pub period: f64,
    pub seed: u64,
}

impl Default for SinusoidParams {
    fn default() -> Self {
        Self {
            n: 10_000,
            m: 100,
            n1: 1000,
            period: 3.0,
            seed: 0,
        }
    }
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::arg(format!("{name} must be positive")));
    }
    Ok(())
}

impl SyntheticBlockParams {
    pub fn validate(&self) -> Result<()> {
        positive("n", self.n)?;
        positive("m", self.m)?;
        positive("k", self.k)?;
        if self.n1 > self.n {
            return Err(Error::arg(format!(
                "n1 = {} exceeds n = {}",
                self.n1, self.n
            )));
        }
        if self.m % 2 != 0 || self.k % 2 != 0 {
            return Err(Error::arg("m and k must be even"));
        }
        if !self.mu.is_finite() {
            return Err(Error::arg("mu must be finite"));
        }
        Ok(())
    }
}

impl SinusoidParams {
    pub fn validate(&self) -> Result<()> {
        positive("n", self.n)?;
        positive("m", self.m)?;
        if self.n1 > self.n {
            return Err(Error::arg(format!(
                "n1 = {} exceeds n = {}",
                self.n1, self.n
            )));
        }
        if self.period == 0.0 || !self.period.is_finite() {
            return Err(Error::arg("period must be finite and non-zero"));
        }
        Ok(())
    }
}

/// Block tensor plus the truth mask (`true` for `i < n1`).
///
/// Row `i` draws its `m * k` entries from its own stream, `j` varying
/// fastest.
pub fn gen_synthetic_block(p: &SyntheticBlockParams) -> Result<(Tensor3, Vec<bool>)> {
    p.validate()?;
    let (n, m, k) = (p.n, p.m, p.k);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(p.seed, rng::SYNTHETIC_ROW, i as u64);
            let mut row = Vec::with_capacity(m * k);
            for kk in 0..k {
                for j in 0..m {
                    let shift = if i < p.n1 && j < m / 2 && kk < k / 2 {
                        p.mu
                    } else {
                        0.0
                    };
                    row.push(shift + standard_normal(&mut rng));
                }
            }
            row
        })
        .collect();
    let t = Tensor3::from_fn((n, m, k), |i, j, kk| rows[i][j + m * kk]);
    Ok((t, (0..n).map(|i| i < p.n1).collect()))
}

/// Sinusoid matrix plus the truth mask (`true` for `i < n1`).
pub fn gen_sinusoid(p: &SinusoidParams) -> Result<(Matrix, Vec<bool>)> {
    p.validate()?;
    let (n, m) = (p.n, p.m);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(p.seed, rng::SINUSOID_ROW, i as u64);
            if i < p.n1 {
                let phase = standard_normal(&mut rng);
                sinusoid_row(m, p.period, phase)
            } else {
                (0..m).map(|_| standard_normal(&mut rng)).collect()
            }
        })
        .collect();
    let values = rows.concat();
    Ok((
        Matrix::new(n, m, values)?,
        (0..n).map(|i| i < p.n1).collect(),
    ))
}

fn sinusoid_row(m: usize, period: f64, phase: f64) -> Vec<f64> {
    (1..=m)
        .map(|j| (std::f64::consts::TAU * j as f64 / period + phase).sin())
        .collect()
}

/// One-column CSV with header `truth` and 0/1 rows.
pub fn write_truth_csv<W: Write>(mut w: W, mask: &[bool]) -> Result<()> {
    writeln!(w, "truth")?;
    for &b in mask {
        writeln!(w, "{}", u8::from(b))?;
    }
    Ok(())
}

pub fn read_truth_csv<R: Read>(r: R) -> Result<Vec<bool>> {
    let mut lines = BufReader::new(r).lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == "truth" => {}
        _ => {
            return Err(Error::Parse(
                "truth CSV must start with a `truth` header".into(),
            ))
        }
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        let field = line.trim();
        if field.is_empty() {
            continue;
        }
        out.push(crate::select::parse_flag(field, n + 2)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd;

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        (
            mean,
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0),
        )
    }

    fn split_block(t: &Tensor3, p: &SyntheticBlockParams) -> (Vec<f64>, Vec<f64>) {
        let (mut block, mut rest) = (Vec::new(), Vec::new());
        for i in 0..p.n {
            for j in 0..p.m {
                for k in 0..p.k {
                    let v = t.get(i, j, k);
                    if i < p.n1 && j < p.m / 2 && k < p.k / 2 {
                        block.push(v)
                    } else {
                        rest.push(v)
                    }
                }
            }
        }
        (block, rest)
    }

    #[test]
    fn synthetic_block_statistics() {
        let p = SyntheticBlockParams {
            seed: 3,
            ..Default::default()
        };
        let (t, mask) = gen_synthetic_block(&p).unwrap();
        assert_eq!(t.dims(), (1000, 20, 20));
        assert_eq!(mask.iter().filter(|b| **b).count(), 10);
        let (block, rest) = split_block(&t, &p);
        let (bm, _) = mean_var(&block);
        assert!((bm - 1.0).abs() <= 4.0 / (block.len() as f64).sqrt());
        let (rm, rv) = mean_var(&rest);
        assert!(rm.abs() < 4.0 / (rest.len() as f64).sqrt());
        assert!((rv - 1.0).abs() < 0.1);
    }

    #[test]
    fn null_block_is_indistinguishable() {
        let p = SyntheticBlockParams {
            mu: 0.0,
            seed: 5,
            ..Default::default()
        };
        let (t, _) = gen_synthetic_block(&p).unwrap();
        let (block, rest) = split_block(&t, &p);
        let (bm, _) = mean_var(&block);
        let (rm, _) = mean_var(&rest);
        let se = (1.0 / block.len() as f64 + 1.0 / rest.len() as f64).sqrt();
        assert!((bm - rm).abs() < 4.0 * se);
    }

    #[test]
    fn generators_are_deterministic() {
        let p = SyntheticBlockParams {
            n: 30,
            seed: 11,
            ..Default::default()
        };
        let a = gen_synthetic_block(&p).unwrap().0;
        let b = gen_synthetic_block(&p).unwrap().0;
        assert_eq!(a.as_slice(), b.as_slice());
        let other = gen_synthetic_block(&SyntheticBlockParams {
            seed: 12,
            ..p.clone()
        })
        .unwrap()
        .0;
        assert_ne!(a.as_slice(), other.as_slice());
        let s = SinusoidParams {
            n: 50,
            n1: 5,
            m: 20,
            ..Default::default()
        };
        assert_eq!(gen_sinusoid(&s).unwrap().0, gen_sinusoid(&s).unwrap().0);
    }

    #[test]
    fn sinusoid_rows() {
        let p = SinusoidParams {
            n: 200,
            m: 100,
            n1: 20,
            period: 3.0,
            seed: 2,
        };
        let (x, mask) = gen_sinusoid(&p).unwrap();
        assert_eq!(mask.iter().filter(|b| **b).count(), 20);
        for i in 0..20 {
            assert!(x.row(i).iter().all(|v| v.abs() <= 1.0));
        }
        let naive: Vec<f64> = (1..=100)
            .map(|j| (2.0 * std::f64::consts::PI * j as f64 / 3.0).sin())
            .collect();
        let row = sinusoid_row(100, 3.0, 0.0);
        for (a, b) in row.iter().zip(&naive) {
            assert!((a - b).abs() < 1e-12);
        }
        let planted = Matrix::from_fn(20, 100, |i, j| x[(i, j)]);
        let s = svd(&planted, None).unwrap().s;
        assert!(s[2] < 1e-8 * s[0]);
    }

    #[test]
    fn parameter_validation() {
        let bad = SyntheticBlockParams {
            n1: 2000,
            ..Default::default()
        };
        assert!(matches!(gen_synthetic_block(&bad), Err(Error::Argument(_))));
        let odd = SyntheticBlockParams {
            m: 5,
            ..Default::default()
        };
        assert!(gen_synthetic_block(&odd).is_err());
        let zero = SinusoidParams {
            period: 0.0,
            ..Default::default()
        };
        assert!(gen_sinusoid(&zero).is_err());
    }

    #[test]
    fn truth_csv_round_trip() {
        let mask = vec![true, false, true];
        let mut buf = Vec::new();
        write_truth_csv(&mut buf, &mask).unwrap();
        assert_eq!(read_truth_csv(&buf[..]).unwrap(), mask);
        assert!(read_truth_csv("x\n1\n".as_bytes()).is_err());
        assert!(read_truth_csv("truth\n2\n".as_bytes()).is_err());
    }
}
