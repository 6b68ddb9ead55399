use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{SynthesisError, Synthesizer, SynthesizerKind};

/// Noise SD as a fraction of each feature's SD.
pub const JITTER_FRACTION: f64 = 0.05;

/// Resamples real rows and perturbs them with small Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterModel {
    pub rows: Vec<Vec<f64>>,
    pub noise_sd: Vec<f64>,
    pub label: u8,
}

impl JitterModel {
    pub fn fit_rows(rows: &[&[f64]], label: u8) -> Result<Self, SynthesisError> {
        if rows.is_empty() {
            return Err(SynthesisError::MissingClass(label));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(SynthesisError::RaggedRows);
        }
        let n = rows.len() as f64;
        let noise_sd = (0..d)
            .map(|j| {
                let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
                let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
                JITTER_FRACTION * var.sqrt()
            })
            .collect();
        Ok(JitterModel {
            rows: rows.iter().map(|r| r.to_vec()).collect(),
            noise_sd,
            label,
        })
    }
}

impl Synthesizer for JitterModel {
    fn kind(&self) -> SynthesizerKind {
        SynthesizerKind::Jitter
    }

    fn label(&self) -> u8 {
        self.label
    }

    fn generate(&self, n: usize, rng: &mut dyn RngCore) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let base = &self.rows[rng.random_range(0..self.rows.len())];
                base.iter()
                    .zip(&self.noise_sd)
                    .map(|(&v, &sd)| {
                        if sd > 0.0 {
                            v + Normal::new(0.0, sd).expect("positive sd").sample(rng)
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect()
    }
}
