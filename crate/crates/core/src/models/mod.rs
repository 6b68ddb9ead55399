//! Binary classifiers behind one train/score interface, plus z-score
//! standardization fitted on training data only.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::scalar::Scalar;
use crate::windowing::{to_sequence, WindowSet};

mod boost;
mod forest;
mod linear;
mod lstm;
mod scaler;
mod tree;

pub use boost::{fit_boost, BoostConfig, Booster};
pub use forest::{fit_forest, Forest, ForestConfig};
pub use linear::{fit_logit, fit_svc, LinearModel, LogitConfig, SvcConfig};
pub use lstm::{fit_lstm, Lstm, LstmConfig};
pub use scaler::Scaler;
pub use tree::{Node, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logit,
    Lstm,
    RandomForest,
    Svc,
    Xgboost,
}

impl ModelKind {
    /// Alphabetical, which is also the grid order.
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Logit,
        ModelKind::Lstm,
        ModelKind::RandomForest,
        ModelKind::Svc,
        ModelKind::Xgboost,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logit => "logit",
            ModelKind::Lstm => "lstm",
            ModelKind::RandomForest => "randomforest",
            ModelKind::Svc => "svc",
            ModelKind::Xgboost => "xgboost",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ModelError::InvalidConfig(format!("unknown model kind {s:?}")))
    }
}

/// Fixed defaults per model family. No tuning happens anywhere.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub logit: LogitConfig,
    pub svc: SvcConfig,
    pub randomforest: ForestConfig,
    pub xgboost: BoostConfig,
    pub lstm: LstmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        ModelConfig {
            kind,
            seed,
            hyperparameters: Hyperparameters::default(),
        }
    }
}

/// Flat training matrix with column names and the per-window step count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub feature_names: Vec<String>,
    pub n_steps: usize,
    pub x: Vec<Vec<T>>,
    pub y: Vec<u8>,
}

impl<T: Scalar> Dataset<T> {
    pub fn from_window_set(set: &WindowSet) -> Self {
        Dataset {
            feature_names: set.feature_names.clone(),
            n_steps: set.n_steps,
            x: set
                .samples
                .iter()
                .map(|s| s.x.iter().map(|&v| T::lit(v)).collect())
                .collect(),
            y: set.samples.iter().map(|s| s.label).collect(),
        }
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.y.iter().filter(|&&l| l == 1).count();
        [self.y.len() - pos, pos]
    }

    /// SHA-256 over names, shape, values and labels.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for name in &self.feature_names {
            h.update(name.as_bytes());
            h.update([0]);
        }
        h.update((self.n_steps as u64).to_le_bytes());
        for row in &self.x {
            for v in row {
                h.update(v.to_f64_lossy().to_bits().to_le_bytes());
            }
        }
        h.update(&self.y);
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub config: ModelConfig,
    pub data_hash: String,
    pub class_counts: [usize; 2],
    /// Epochs or boosting rounds actually run, where applicable.
    pub iterations: Option<usize>,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "lowercase")]
pub enum Params<T> {
    Logit(LinearModel<T>),
    Lstm(Lstm<T>),
    RandomForest(Forest<T>),
    Svc(LinearModel<T>),
    Xgboost(Booster<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel<T> {
    pub feature_names: Vec<String>,
    pub n_steps: usize,
    pub scaler: Scaler<T>,
    pub params: Params<T>,
    pub manifest: TrainingManifest,
}

/// Iteration count and final loss of an iterative fit.
pub(crate) type Trace = (Option<usize>, Option<f64>);

pub fn train<T: Scalar>(data: &Dataset<T>, cfg: &ModelConfig) -> Result<TrainedModel<T>, ModelError> {
    if data.x.is_empty() {
        return Err(ModelError::Empty);
    }
    let width = data.feature_names.len();
    if let Some(row) = data.x.iter().find(|r| r.len() != width) {
        return Err(ModelError::DimensionMismatch {
            expected: width,
            found: row.len(),
        });
    }
    let counts = data.class_counts();
    for label in [0u8, 1] {
        if counts[label as usize] == 0 {
            return Err(ModelError::MissingClass(label));
        }
    }
    let scaler = Scaler::fit(&data.x);
    let x: Vec<Vec<T>> = data.x.iter().map(|r| scaler.transform(r)).collect();
    let hp = &cfg.hyperparameters;
    let (params, (iterations, final_loss)) = match cfg.kind {
        ModelKind::Logit => {
            let (m, losses) = fit_logit(&x, &data.y, &hp.logit)?;
            (Params::Logit(m), (Some(losses.len()), losses.last().map(|l| l.to_f64_lossy())))
        }
        ModelKind::Svc => {
            let (m, trace) = fit_svc(&x, &data.y, &hp.svc, cfg.seed)?;
            (Params::Svc(m), trace)
        }
        ModelKind::RandomForest => (
            Params::RandomForest(fit_forest(&x, &data.y, &hp.randomforest, cfg.seed)),
            (None, None),
        ),
        ModelKind::Xgboost => {
            let b = fit_boost(&x, &data.y, &hp.xgboost);
            let rounds = b.trees.len();
            (Params::Xgboost(b), (Some(rounds), None))
        }
        ModelKind::Lstm => {
            if data.n_steps == 0 || !width.is_multiple_of(data.n_steps) {
                return Err(ModelError::InvalidConfig(format!(
                    "{width} columns do not split into {} steps",
                    data.n_steps
                )));
            }
            let seqs: Vec<Vec<Vec<T>>> = x.iter().map(|r| to_sequence(r, data.n_steps)).collect();
            let (m, trace) = fit_lstm(&seqs, &data.y, &hp.lstm, cfg.seed)?;
            (Params::Lstm(m), trace)
        }
    };
    Ok(TrainedModel {
        feature_names: data.feature_names.clone(),
        n_steps: data.n_steps,
        scaler,
        params,
        manifest: TrainingManifest {
            config: cfg.clone(),
            data_hash: data.hash(),
            class_counts: counts,
            iterations,
            final_loss,
        },
    })
}

impl<T: Scalar> TrainedModel<T> {
    pub fn kind(&self) -> ModelKind {
        self.manifest.config.kind
    }

    /// Score of a raw (unscaled) flat feature vector, in [0, 1].
    pub fn score(&self, x: &[T]) -> Result<T, ModelError> {
        if x.len() != self.feature_names.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.feature_names.len(),
                found: x.len(),
            });
        }
        let z = self.scaler.transform(x);
        Ok(match &self.params {
            Params::Logit(m) | Params::Svc(m) => m.score(&z),
            Params::RandomForest(f) => f.score(&z),
            Params::Xgboost(b) => b.score(&z),
            Params::Lstm(l) => l.score(&to_sequence(&z, self.n_steps)),
        })
    }

    /// Checks column names against the training columns before scoring.
    pub fn score_named(&self, names: &[String], x: &[T]) -> Result<T, ModelError> {
        if names.len() != self.feature_names.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.feature_names.len(),
                found: names.len(),
            });
        }
        if let Some((position, (a, b))) = self
            .feature_names
            .iter()
            .zip(names)
            .enumerate()
            .find(|(_, (a, b))| a != b)
        {
            return Err(ModelError::FeatureMismatch {
                position,
                expected: a.clone(),
                found: b.clone(),
            });
        }
        self.score(x)
    }

    pub fn score_all(&self, xs: &[Vec<T>]) -> Result<Vec<T>, ModelError> {
        xs.iter().map(|x| self.score(x)).collect()
    }

    /// 1 iff the score strictly exceeds `threshold`.
    pub fn classify(&self, x: &[T], threshold: T) -> Result<u8, ModelError> {
        Ok(classify_score(self.score(x)?, threshold))
    }

    /// `model_<kind>_<hash>.json`, the hash covering the serialized model.
    pub fn file_name(&self) -> String {
        let json = serde_json::to_vec(self).expect("model serializes");
        let digest = hex(&Sha256::digest(&json));
        format!("model_{}_{}.json", self.kind(), &digest[..16])
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, ModelError> {
        let path = dir.join(self.file_name());
        let json = serde_json::to_string(self).expect("model serializes");
        std::fs::write(&path, json).map_err(|source| ModelError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ModelError::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn classify_score<T: Scalar>(score: T, threshold: T) -> u8 {
    u8::from(score > threshold)
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("training data has no samples of class {0}")]
    MissingClass(u8),
    #[error("training data is empty")]
    Empty,
    #[error("{model} loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { model: ModelKind, epoch: usize },
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("feature {position} is {found:?}, the model was trained on {expected:?}")]
    FeatureMismatch {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model file {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Rejects training data lacking a class.
pub(crate) fn check_classes(y: &[u8]) -> Result<(), ModelError> {
    for label in [0u8, 1] {
        if !y.contains(&label) {
            return Err(ModelError::MissingClass(label));
        }
    }
    Ok(())
}
