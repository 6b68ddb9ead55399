use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Standard deviations below this are treated as 1.
pub const MIN_SD: f64 = 1e-12;

/// Per-column z-scoring with the sample (n - 1) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler<T> {
    pub mean: Vec<T>,
    pub sd: Vec<T>,
}

impl<T: Scalar> Scaler<T> {
    pub fn fit(x: &[Vec<T>]) -> Self {
        let p = x.first().map_or(0, Vec::len);
        let n = T::from_usize_lossy(x.len());
        let mut mean = vec![T::zero(); p];
        let mut sd = vec![T::one(); p];
        for j in 0..p {
            let m = x.iter().map(|r| r[j]).sum::<T>() / n;
            mean[j] = m;
            if x.len() > 1 {
                let ss = x.iter().map(|r| (r[j] - m) * (r[j] - m)).sum::<T>();
                let s = (ss / (n - T::one())).sqrt();
                if s >= T::lit(MIN_SD) {
                    sd[j] = s;
                }
            }
        }
        Scaler { mean, sd }
    }

    pub fn transform(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }
}
