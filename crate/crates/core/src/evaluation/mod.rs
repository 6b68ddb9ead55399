//! Confusion-matrix metrics, ROC analysis, Monte-Carlo cross-validation
//! rounds and the experiment grid.

use std::path::PathBuf;

mod grid;
mod metrics;
mod report;
mod roc;
mod round;

pub use grid::{evaluate_cells, rounds_dir, run_grid, windows_file, Cell, ExperimentConfig, ExperimentResult, GridOutcome, GridSpec, Summary};
pub use metrics::{confusion, ConfusionMatrix};
pub use report::{pct_change, read_results_json, render_results_csv, results_row, write_reports, RESULTS_HEADER};
pub use roc::{mean_roc, roc, trapezoid, RocCurve, MEAN_ROC_POINTS};
pub use round::{evaluate_split, round_seed, run_round, RoundMetrics};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("length mismatch: {truth} labels vs {other} predictions")]
    LengthMismatch { truth: usize, other: usize },
    #[error("labels must be 0 or 1")]
    NotBinary,
    #[error("ROC needs both classes in the test labels")]
    SingleClass,
    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<EvalError>,
    },
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error(transparent)]
    Window(#[from] crate::windowing::WindowError),
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
    #[error("malformed results file {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}
