use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{fit_synthesizer, SynthesisError, SynthesizerKind};
use crate::windowing::WindowSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceConfig {
    /// Target share of positive samples in the augmented training set.
    pub event_proportion: f64,
    /// Target size as a multiple of the real training set.
    #[serde(default = "one")]
    pub multiplier: f64,
}

fn one() -> f64 {
    1.0
}

impl BalanceConfig {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if !(self.event_proportion > 0.0 && self.event_proportion < 1.0) {
            return Err(SynthesisError::InvalidParameters(format!(
                "event proportion {} must lie in (0, 1)",
                self.event_proportion
            )));
        }
        if !(self.multiplier >= 1.0 && self.multiplier.is_finite()) {
            return Err(SynthesisError::InvalidParameters(format!(
                "multiplier {} must be >= 1",
                self.multiplier
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceOutcome {
    /// Real samples in their original order, then synthetic positives, then
    /// synthetic negatives.
    pub samples: Vec<WindowSample>,
    /// Synthetic samples added, indexed by label.
    pub added: [usize; 2],
    pub synthesizers: [Option<SynthesizerKind>; 2],
    pub proportion: f64,
}

/// Synthetic counts `[negatives, positives]` to add to `neg` + `pos` real
/// samples.
///
/// The target size is `round(m * (neg + pos))` with `round(rho * size)`
/// positives. If the real negatives alone exceed their share, the set grows
/// past the target size until the proportion is met.
pub fn balance_counts(neg: usize, pos: usize, cfg: &BalanceConfig) -> Result<[usize; 2], SynthesisError> {
    cfg.validate()?;
    if pos == 0 {
        return Err(SynthesisError::MissingClass(1));
    }
    if neg == 0 {
        return Err(SynthesisError::MissingClass(0));
    }
    let rho = cfg.event_proportion;
    let total = (cfg.multiplier * (neg + pos) as f64).round() as usize;
    let pos_target = (rho * total as f64).round() as usize;
    if pos > pos_target {
        return Err(SynthesisError::Unreachable {
            requested: rho,
            min_feasible: pos as f64 / total as f64,
        });
    }
    let neg_target = total - pos_target;
    if neg > neg_target {
        let grown = ((rho / (1.0 - rho)) * neg as f64).round() as usize;
        return Ok([0, grown.max(pos) - pos]);
    }
    Ok([neg_target - neg, pos_target - pos])
}

/// Augments `train` with per-class synthetic samples to reach the configured
/// event proportion and size. Real samples are never altered or removed.
pub fn balance(
    train: &[WindowSample],
    cfg: &BalanceConfig,
    rng: &mut dyn RngCore,
) -> Result<BalanceOutcome, SynthesisError> {
    let pos = train.iter().filter(|s| s.label == 1).count();
    let added = balance_counts(train.len() - pos, pos, cfg)?;
    let mut samples = train.to_vec();
    let mut synthesizers = [None, None];
    for label in [1u8, 0] {
        let n = added[label as usize];
        if n == 0 {
            continue;
        }
        let synth = fit_synthesizer(train, label)?;
        synthesizers[label as usize] = Some(synth.kind());
        samples.extend(synth.sample(n, rng));
    }
    let positives = samples.iter().filter(|s| s.label == 1).count();
    let proportion = positives as f64 / samples.len() as f64;
    Ok(BalanceOutcome {
        samples,
        added,
        synthesizers,
        proportion,
    })
}
