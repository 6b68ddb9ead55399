use std::path::Path;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{confusion, roc, ConfusionMatrix, EvalError, RocCurve};
use crate::models::{classify_score, train, Dataset, ModelConfig};
use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;
use crate::windowing::{read_samples, WindowSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub confusion: ConfusionMatrix,
    pub precision: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub f1: f64,
    pub auc: f64,
    pub roc: RocCurve<f64>,
}

/// Model seed for one round, derived from the configured seed.
pub fn round_seed(seed: u64, round: usize) -> u64 {
    stream(seed, Purpose::Model, round as u64).next_u64()
}

/// Trains on `train`, scores `test` and computes every metric.
pub fn evaluate_split<T: Scalar>(
    train_set: &WindowSet,
    test_set: &WindowSet,
    cfg: &ModelConfig,
    round: usize,
    threshold: f64,
) -> Result<RoundMetrics, EvalError> {
    let mut cfg = cfg.clone();
    cfg.seed = round_seed(cfg.seed, round);
    let model = train(&Dataset::<T>::from_window_set(train_set), &cfg)?;
    let test = Dataset::<T>::from_window_set(test_set);
    let scores: Vec<f64> = model
        .score_all(&test.x)?
        .into_iter()
        .map(|s| s.to_f64_lossy())
        .collect();
    let predicted: Vec<u8> = scores.iter().map(|&s| classify_score(s, threshold)).collect();
    let cm = confusion(&test.y, &predicted)?;
    let curve = roc(&test.y, &scores)?;
    Ok(RoundMetrics {
        round,
        confusion: cm,
        precision: cm.precision(),
        tpr: cm.tpr(),
        tnr: cm.tnr(),
        f1: cm.f1(),
        auc: curve.auc,
        roc: curve,
    })
}

/// Runs one materialized round (`train.csv`, `test.csv` in `dir`). Errors
/// carry the round index.
pub fn run_round<T: Scalar>(
    dir: &Path,
    cfg: &ModelConfig,
    round: usize,
    threshold: f64,
) -> Result<RoundMetrics, EvalError> {
    let tag = |e: EvalError| EvalError::Round {
        round,
        source: Box::new(e),
    };
    let train_set = read_samples(&dir.join("train.csv")).map_err(|e| tag(e.into()))?;
    let test_set = read_samples(&dir.join("test.csv")).map_err(|e| tag(e.into()))?;
    evaluate_split::<T>(&train_set, &test_set, cfg, round, threshold).map_err(tag)
}
