//! Synthetic training windows: a per-class Gaussian copula over empirical
//! marginals, a jitter fallback for tiny classes, and class balancing.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::windowing::{Provenance, WindowSample};

mod balance;
mod copula;
mod jitter;

pub use balance::{balance, balance_counts, BalanceConfig, BalanceOutcome};
pub use copula::CopulaModel;
pub use jitter::JitterModel;

/// Minimum class size for fitting a copula.
pub const MIN_COPULA_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesizerKind {
    GaussianCopula,
    Jitter,
}

/// A fitted generator of feature vectors for one class.
pub trait Synthesizer: Send + Sync {
    fn kind(&self) -> SynthesizerKind;
    fn label(&self) -> u8;
    fn generate(&self, n: usize, rng: &mut dyn RngCore) -> Vec<Vec<f64>>;

    /// Synthetic window samples carrying this synthesizer's label.
    fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Vec<WindowSample> {
        let (player, anchor_date) = crate::windowing::synthetic_key();
        self.generate(n, rng)
            .into_iter()
            .map(|x| WindowSample {
                player: player.clone(),
                anchor_date,
                x,
                label: self.label(),
                provenance: Provenance::Synthetic,
            })
            .collect()
    }
}

/// Rows of `samples` whose label is `label`.
pub(crate) fn class_rows(samples: &[WindowSample], label: u8) -> Vec<&[f64]> {
    samples
        .iter()
        .filter(|s| s.label == label)
        .map(|s| s.x.as_slice())
        .collect()
}

/// Copula when the class is large enough, jitter resampling otherwise.
pub fn fit_synthesizer(samples: &[WindowSample], label: u8) -> Result<Box<dyn Synthesizer>, SynthesisError> {
    let rows = class_rows(samples, label);
    if rows.len() >= MIN_COPULA_SAMPLES {
        Ok(Box::new(CopulaModel::fit_rows(&rows, label)?))
    } else {
        log::warn!(
            "class {label} has {} samples; falling back to jitter resampling",
            rows.len()
        );
        Ok(Box::new(JitterModel::fit_rows(&rows, label)?))
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SynthesisError {
    #[error("class {label} has {count} samples; the copula needs at least {MIN_COPULA_SAMPLES}")]
    TooFewSamples { label: u8, count: usize },
    #[error("rows have inconsistent lengths")]
    RaggedRows,
    #[error("class {0} is absent from the training set")]
    MissingClass(u8),
    #[error(
        "event proportion {requested} is unreachable without deleting real samples; \
         the minimum feasible proportion is {min_feasible:.6}"
    )]
    Unreachable { requested: f64, min_feasible: f64 },
    #[error("invalid balance parameters: {0}")]
    InvalidParameters(String),
}
