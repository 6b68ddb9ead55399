use nalgebra::{DMatrix, SymmetricEigen};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{class_rows, SynthesisError, Synthesizer, SynthesizerKind, MIN_COPULA_SAMPLES};
use crate::windowing::WindowSample;

/// Eigenvalue floor of the latent correlation repair.
pub const EIGEN_FLOOR: f64 = 1e-8;

/// Empirical marginals tied together by a latent Gaussian correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaModel {
    /// Sorted training values per feature.
    pub quantiles: Vec<Vec<f64>>,
    /// Latent correlation, row-major, unit diagonal, PSD.
    pub correlation: Vec<Vec<f64>>,
    /// Lower-triangular factor with `factor * factor^T = correlation`.
    factor: Vec<Vec<f64>>,
    pub label: u8,
    pub n: usize,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid parameters")
}

/// Average ranks (1-based) of `values`, ties sharing their mean rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation matrix of the columns; zero-variance columns are
/// uncorrelated with everything else.
pub(crate) fn pearson(columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = columns.len();
    let centered: Vec<(Vec<f64>, f64)> = columns
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / c.len() as f64;
            let v: Vec<f64> = c.iter().map(|x| x - m).collect();
            let ss = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            (v, ss)
        })
        .collect();
    let mut r = vec![vec![0.0; d]; d];
    for i in 0..d {
        r[i][i] = 1.0;
        for j in 0..i {
            let (a, sa) = &centered[i];
            let (b, sb) = &centered[j];
            let rho = if *sa > 0.0 && *sb > 0.0 {
                (a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (sa * sb)).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            r[i][j] = rho;
            r[j][i] = rho;
        }
    }
    r
}

/// Clips eigenvalues at [`EIGEN_FLOOR`] and restores the unit diagonal.
fn repair(corr: &[Vec<f64>]) -> DMatrix<f64> {
    let d = corr.len();
    let m = DMatrix::from_fn(d, d, |i, j| corr[i][j]);
    let eig = SymmetricEigen::new(m);
    let clipped = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let scale: Vec<f64> = (0..d).map(|i| rebuilt[(i, i)].sqrt()).collect();
    DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            let v = (rebuilt[(i, j)] + rebuilt[(j, i)]) / 2.0;
            v / (scale[i] * scale[j])
        }
    })
}

fn factorize(c: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let d = c.nrows();
    let l = match c.clone().cholesky() {
        Some(ch) => ch.l(),
        None => {
            // numerically semidefinite: symmetric square root works as a factor
            let eig = SymmetricEigen::new(c.clone());
            let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
            &eig.eigenvectors * DMatrix::from_diagonal(&sqrt)
        }
    };
    (0..d).map(|i| (0..d).map(|j| l[(i, j)]).collect()).collect()
}

impl CopulaModel {
    /// Fits on the samples of one class.
    pub fn fit(samples: &[WindowSample], label: u8) -> Result<Self, SynthesisError> {
        Self::fit_rows(&class_rows(samples, label), label)
    }

    pub fn fit_rows(rows: &[&[f64]], label: u8) -> Result<Self, SynthesisError> {
        let n = rows.len();
        if n < MIN_COPULA_SAMPLES {
            return Err(SynthesisError::TooFewSamples { label, count: n });
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(SynthesisError::RaggedRows);
        }
        let normal = std_normal();
        let mut quantiles = Vec::with_capacity(d);
        let mut scores = Vec::with_capacity(d);
        for j in 0..d {
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let ranks = average_ranks(&column);
            scores.push(
                ranks
                    .iter()
                    .map(|r| normal.inverse_cdf(r / (n as f64 + 1.0)))
                    .collect::<Vec<f64>>(),
            );
            let mut sorted = column;
            sorted.sort_by(f64::total_cmp);
            quantiles.push(sorted);
        }
        let repaired = repair(&pearson(&scores));
        let factor = factorize(&repaired);
        let correlation = (0..d).map(|i| (0..d).map(|j| repaired[(i, j)]).collect()).collect();
        Ok(CopulaModel {
            quantiles,
            correlation,
            factor,
            label,
            n,
        })
    }

    pub fn dim(&self) -> usize {
        self.quantiles.len()
    }

    /// Inverse empirical CDF with linear interpolation between order statistics.
    fn invert(sorted: &[f64], u: f64) -> f64 {
        let pos = u.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
        let i = pos.floor() as usize;
        if i + 1 >= sorted.len() {
            return sorted[sorted.len() - 1];
        }
        let frac = pos - i as f64;
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    }
}

impl Synthesizer for CopulaModel {
    fn kind(&self) -> SynthesizerKind {
        SynthesizerKind::GaussianCopula
    }

    fn label(&self) -> u8 {
        self.label
    }

    fn generate(&self, n: usize, rng: &mut dyn RngCore) -> Vec<Vec<f64>> {
        let normal = std_normal();
        let d = self.dim();
        let mut eps = vec![0.0; d];
        (0..n)
            .map(|_| {
                for e in eps.iter_mut() {
                    *e = StandardNormal.sample(rng);
                }
                (0..d)
                    .map(|i| {
                        let z: f64 = self.factor[i][..=i].iter().zip(&eps).map(|(l, e)| l * e).sum();
                        Self::invert(&self.quantiles[i], normal.cdf(z))
                    })
                    .collect()
            })
            .collect()
    }
}
