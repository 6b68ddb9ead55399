//! Sliding-window samples over consecutive sessions, MCCV splits and the
//! on-disk round layout.

use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ingest::PlayerId;
use crate::store::FeatureGroup;

mod build;
mod io;
mod rounds;
mod split;

pub use build::build_windows;
pub use io::{read_samples, write_samples};
pub use rounds::{materialize_rounds, round_dir, RoundManifest, RoundsManifest};
pub use split::{split, Split};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitBy {
    /// Stratified at window level; overlapping windows may straddle the split.
    #[default]
    Window,
    /// Whole players go to either train or test.
    Player,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSpec {
    /// Sessions in the input window.
    pub n_in: usize,
    /// Sessions in the output (label) window.
    pub n_out: usize,
    /// Applies to both the input span and anchor-to-last-output span.
    pub max_span_days: i64,
    pub groups: Vec<FeatureGroup>,
    pub test_fraction: f64,
    pub rounds: usize,
    pub seed: u64,
    pub split_by: SplitBy,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            n_in: 3,
            n_out: 1,
            max_span_days: 14,
            groups: vec![FeatureGroup::TL, FeatureGroup::W, FeatureGroup::GPS],
            test_fraction: 0.2,
            rounds: 30,
            seed: 42,
            split_by: SplitBy::Window,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<(), WindowError> {
        let bad = |msg: &str| Err(WindowError::InvalidSpec(msg.to_string()));
        if self.n_in == 0 || self.n_out == 0 {
            return bad("n_in and n_out must be >= 1");
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad("test_fraction must lie in (0, 1)");
        }
        if self.rounds == 0 {
            return bad("rounds must be >= 1");
        }
        if self.max_span_days < 0 {
            return bad("max_span_days must be >= 0");
        }
        if self.groups.is_empty() || self.groups.contains(&FeatureGroup::INJURY) {
            return bad("groups must be a non-empty subset of TL, W, GPS, MATCH");
        }
        Ok(())
    }

    /// Comma-joined group tags, e.g. `TL,W,GPS`.
    pub fn groups_label(&self) -> String {
        self.groups.iter().map(|g| g.as_str()).collect::<Vec<_>>().join(",")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Real,
    Synthetic,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::Synthetic => "synthetic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub player: PlayerId,
    /// Date of the last input session.
    pub anchor_date: NaiveDate,
    /// Feature-major: all positions of the first feature (oldest first), then
    /// the next feature.
    pub x: Vec<f64>,
    pub label: u8,
    pub provenance: Provenance,
}

/// Samples plus the names of their flattened columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSet {
    pub feature_names: Vec<String>,
    /// Sessions per window (positions per base feature).
    pub n_steps: usize,
    pub samples: Vec<WindowSample>,
}

impl WindowSet {
    pub fn base_features(&self) -> usize {
        self.feature_names.len().checked_div(self.n_steps).unwrap_or(0)
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.samples.iter().filter(|s| s.label == 1).count();
        [self.samples.len() - pos, pos]
    }

    /// Same columns, different samples.
    pub fn with_samples(&self, samples: Vec<WindowSample>) -> WindowSet {
        WindowSet {
            feature_names: self.feature_names.clone(),
            n_steps: self.n_steps,
            samples,
        }
    }
}

/// Key carried by generated samples, which belong to no player or date.
pub(crate) fn synthetic_key() -> (PlayerId, NaiveDate) {
    (
        PlayerId::new("synthetic").expect("non-empty"),
        NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date"),
    )
}

/// Flattened column names: `<feature>_<position>`, positions 1..=n oldest
/// first, grouped by feature.
pub fn flattened_names(features: &[String], n_steps: usize) -> Vec<String> {
    features
        .iter()
        .flat_map(|f| (1..=n_steps).map(move |k| format!("{f}_{k}")))
        .collect()
}

/// Reshapes a feature-major flat vector into `n_steps` rows of per-session
/// features, oldest first.
pub fn to_sequence<T: Copy>(x: &[T], n_steps: usize) -> Vec<Vec<T>> {
    let per_step = x.len() / n_steps;
    (0..n_steps)
        .map(|t| (0..per_step).map(|f| x[f * n_steps + t]).collect())
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum WindowError {
    #[error("invalid window spec: {0}")]
    InvalidSpec(String),
    #[error("feature {feature} is absent for player {player} on {date}; impute the store first")]
    MissingValue {
        player: PlayerId,
        date: NaiveDate,
        feature: String,
    },
    #[error("class {label} has {count} real samples; at least 2 are needed to split")]
    ClassTooSmall { label: u8, count: usize },
    #[error("target directory {0} is not empty (use --force to overwrite)")]
    TargetNotEmpty(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Synthesis(#[from] crate::synthesis::SynthesisError),
}
