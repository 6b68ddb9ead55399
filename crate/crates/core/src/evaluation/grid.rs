use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_roc, run_round, write_reports, EvalError, RocCurve, RoundMetrics};
use crate::models::{Hyperparameters, ModelConfig, ModelKind};
use crate::scalar::Scalar;
use crate::store::{FeatureGroup, FeatureStore};
use crate::synthesis::BalanceConfig;
use crate::windowing::{build_windows, materialize_rounds, round_dir, SplitBy, WindowSet, WindowSpec};

/// Label of training data mixing real and synthetic windows.
pub const REAL_PLUS_SYNTHETIC: &str = "R+S";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Enumerated outermost, in this order.
    pub event_proportions: Vec<f64>,
    pub n_in: Vec<usize>,
    pub n_out: Vec<usize>,
    pub models: Vec<ModelKind>,
    pub groups: Vec<FeatureGroup>,
    pub rounds: usize,
    pub test_fraction: f64,
    pub max_span_days: i64,
    pub multiplier: f64,
    pub seed: u64,
    pub threshold: f64,
    pub split_by: SplitBy,
    pub hyperparameters: Hyperparameters,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            event_proportions: vec![0.25, 0.5, 0.1],
            n_in: vec![3, 5, 7],
            n_out: vec![1, 3, 7],
            models: ModelKind::ALL.to_vec(),
            groups: vec![FeatureGroup::TL, FeatureGroup::W, FeatureGroup::GPS],
            rounds: 30,
            test_fraction: 0.2,
            max_span_days: 14,
            multiplier: 1.0,
            seed: 42,
            threshold: 0.5,
            split_by: SplitBy::Window,
            hyperparameters: Hyperparameters::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: String,
    pub event_proportion: f64,
    pub n_in: usize,
    pub n_out: usize,
    /// Comma-joined feature groups.
    pub features: String,
    pub model: ModelKind,
    pub multiplier: f64,
    pub rounds: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single round.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Summary {
            // guards against the last-ulp overshoot of summation
            mean: mean.clamp(
                values.iter().copied().fold(f64::INFINITY, f64::min),
                values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
            sd,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub id: String,
    pub config: ExperimentConfig,
    pub precision: Option<Summary>,
    pub tpr: Option<Summary>,
    pub tnr: Option<Summary>,
    pub f1: Option<Summary>,
    pub auc: Option<Summary>,
    pub rounds: Vec<RoundMetrics>,
    pub mean_roc: Option<RocCurve<f64>>,
    /// Set when the cell failed; metrics are then absent.
    pub error: Option<String>,
}

impl ExperimentResult {
    pub fn failed(cell: &Cell, error: String) -> Self {
        ExperimentResult {
            id: cell.id.clone(),
            config: cell.config.clone(),
            precision: None,
            tpr: None,
            tnr: None,
            f1: None,
            auc: None,
            rounds: Vec::new(),
            mean_roc: None,
            error: Some(error),
        }
    }

    pub fn from_rounds(cell: &Cell, rounds: Vec<RoundMetrics>) -> Self {
        let pick = |f: fn(&RoundMetrics) -> f64| Some(Summary::of(&rounds.iter().map(f).collect::<Vec<_>>()));
        let curves: Vec<RocCurve<f64>> = rounds.iter().map(|r| r.roc.clone()).collect();
        ExperimentResult {
            id: cell.id.clone(),
            config: cell.config.clone(),
            precision: pick(|r| r.precision),
            tpr: pick(|r| r.tpr),
            tnr: pick(|r| r.tnr),
            f1: pick(|r| r.f1),
            auc: pick(|r| r.auc),
            mean_roc: Some(mean_roc(&curves)),
            rounds,
            error: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub results: Vec<ExperimentResult>,
    pub failed: usize,
}

pub type WindowKey = (usize, usize);
/// Event proportion bits, n_in, n_out.
type RoundsKey = (u64, usize, usize);

impl GridSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidGrid(m.to_string()));
        if self.event_proportions.is_empty() || self.n_in.is_empty() || self.n_out.is_empty() || self.models.is_empty()
        {
            return bad("every grid axis needs at least one value");
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold must lie in [0, 1]");
        }
        for &rho in &self.event_proportions {
            self.balance(rho).validate().map_err(|e| EvalError::InvalidGrid(e.to_string()))?;
        }
        for &n_in in &self.n_in {
            for &n_out in &self.n_out {
                self.window_spec(n_in, n_out).validate()?;
            }
        }
        Ok(())
    }

    pub fn window_spec(&self, n_in: usize, n_out: usize) -> WindowSpec {
        WindowSpec {
            n_in,
            n_out,
            max_span_days: self.max_span_days,
            groups: self.groups.clone(),
            test_fraction: self.test_fraction,
            rounds: self.rounds,
            seed: self.seed,
            split_by: self.split_by,
        }
    }

    pub fn balance(&self, event_proportion: f64) -> BalanceConfig {
        BalanceConfig {
            event_proportion,
            multiplier: self.multiplier,
        }
    }

    /// All cells with 1-based ids, ordered by event proportion, n_in, n_out,
    /// then model.
    pub fn cells(&self) -> Vec<Cell> {
        let features = self.window_spec(1, 1).groups_label();
        let mut cells = Vec::new();
        for &rho in &self.event_proportions {
            for &n_in in &self.n_in {
                for &n_out in &self.n_out {
                    for &model in &self.models {
                        cells.push(Cell {
                            id: format!("I-{}", cells.len() + 1),
                            config: ExperimentConfig {
                                data: REAL_PLUS_SYNTHETIC.to_string(),
                                event_proportion: rho,
                                n_in,
                                n_out,
                                features: features.clone(),
                                model,
                                multiplier: self.multiplier,
                                rounds: self.rounds,
                                seed: self.seed,
                            },
                        });
                    }
                }
            }
        }
        cells
    }

    pub fn model_config(&self, model: ModelKind) -> ModelConfig {
        ModelConfig {
            kind: model,
            seed: self.seed,
            hyperparameters: self.hyperparameters.clone(),
        }
    }
}

/// Rounds directory of one (event proportion, n_in, n_out) combination
/// under `root`.
pub fn rounds_dir(root: &Path, event_proportion: f64, n_in: usize, n_out: usize) -> PathBuf {
    root.join(format!("event{event_proportion}_in{n_in}_out{n_out}"))
}

/// Window file of one (n_in, n_out) combination under `root`.
pub fn windows_file(root: &Path, n_in: usize, n_out: usize) -> PathBuf {
    root.join(format!("in{n_in}_out{n_out}.csv"))
}

fn prepare(out_dir: &Path, force: bool) -> Result<(), EvalError> {
    let io = |source| EvalError::Io {
        path: out_dir.to_path_buf(),
        source,
    };
    if out_dir.exists() && fs::read_dir(out_dir).map_err(io)?.next().is_some() {
        if !force {
            return Err(crate::windowing::WindowError::TargetNotEmpty(out_dir.to_path_buf()).into());
        }
        for name in ["rounds", "cells"] {
            let p = out_dir.join(name);
            if p.exists() {
                fs::remove_dir_all(&p).map_err(io)?;
            }
        }
    }
    fs::create_dir_all(out_dir).map_err(io)
}

impl GridSpec {
    /// The cells with the given ids, in grid order. An empty list selects all.
    pub fn select(&self, ids: &[String]) -> Result<Vec<Cell>, EvalError> {
        let cells = self.cells();
        if let Some(unknown) = ids.iter().find(|id| !cells.iter().any(|c| &c.id == *id)) {
            return Err(EvalError::InvalidGrid(format!(
                "unknown cell {unknown}; this grid has I-1..I-{}",
                cells.len()
            )));
        }
        Ok(cells
            .into_iter()
            .filter(|c| ids.is_empty() || ids.contains(&c.id))
            .collect())
    }

    /// Distinct (n_in, n_out) pairs used by `cells`.
    pub fn window_keys(cells: &[Cell]) -> Vec<WindowKey> {
        let mut keys: Vec<WindowKey> = cells.iter().map(|c| (c.config.n_in, c.config.n_out)).collect();
        keys.sort();
        keys.dedup();
        keys
    }

    /// Distinct (event proportion, n_in, n_out) triples used by `cells`.
    pub fn round_keys(cells: &[Cell]) -> Vec<(f64, usize, usize)> {
        let mut keys: Vec<RoundsKey> = cells
            .iter()
            .map(|c| (c.config.event_proportion.to_bits(), c.config.n_in, c.config.n_out))
            .collect();
        keys.sort();
        keys.dedup();
        keys.into_iter().map(|(r, i, o)| (f64::from_bits(r), i, o)).collect()
    }
}

/// Trains and scores every cell over the rounds found under `rounds_root`.
/// A failing cell is recorded and the rest continue.
pub fn evaluate_cells<T: Scalar>(grid: &GridSpec, cells: &[Cell], rounds_root: &Path) -> Vec<ExperimentResult> {
    cells
        .par_iter()
        .map(|cell| {
            let c = &cell.config;
            let dir = rounds_dir(rounds_root, c.event_proportion, c.n_in, c.n_out);
            let cfg = grid.model_config(c.model);
            let rounds: Result<Vec<RoundMetrics>, EvalError> = (0..grid.rounds)
                .into_par_iter()
                .map(|k| run_round::<T>(&round_dir(&dir, k), &cfg, k, grid.threshold))
                .collect();
            match rounds {
                Ok(r) => ExperimentResult::from_rounds(cell, r),
                Err(e) => {
                    log::warn!("{} failed: {e}", cell.id);
                    ExperimentResult::failed(cell, e.to_string())
                }
            }
        })
        .collect()
}

/// Runs the whole grid from a feature store: windows, balanced rounds under
/// `out_dir/rounds`, then every cell, and writes the reports.
pub fn run_grid<T: Scalar>(
    store: &FeatureStore,
    grid: &GridSpec,
    out_dir: &Path,
    force: bool,
) -> Result<GridOutcome, EvalError> {
    grid.validate()?;
    prepare(out_dir, force)?;
    let cells = grid.cells();
    let rounds_root = out_dir.join("rounds");

    let windows: BTreeMap<WindowKey, Result<WindowSet, String>> = GridSpec::window_keys(&cells)
        .par_iter()
        .map(|&(i, o)| ((i, o), build_windows(store, &grid.window_spec(i, o)).map_err(|e| e.to_string())))
        .collect();

    let materialized: BTreeMap<RoundsKey, Result<(), String>> = GridSpec::round_keys(&cells)
        .par_iter()
        .map(|&(rho, i, o)| {
            let outcome = windows[&(i, o)].clone().and_then(|set| {
                let dir = rounds_dir(&rounds_root, rho, i, o);
                materialize_rounds(&set, &grid.window_spec(i, o), Some(&grid.balance(rho)), &dir, true)
                    .map(|_| ())
                    .map_err(|e| e.to_string())
            });
            ((rho.to_bits(), i, o), outcome)
        })
        .collect();

    let (ready, broken): (Vec<Cell>, Vec<Cell>) = cells.into_iter().partition(|c| {
        materialized[&(c.config.event_proportion.to_bits(), c.config.n_in, c.config.n_out)].is_ok()
    });
    let mut results = evaluate_cells::<T>(grid, &ready, &rounds_root);
    for cell in &broken {
        let c = &cell.config;
        let e = materialized[&(c.event_proportion.to_bits(), c.n_in, c.n_out)].clone().unwrap_err();
        results.push(ExperimentResult::failed(cell, e));
    }
    results.sort_by_key(|r| r.id.trim_start_matches("I-").parse::<usize>().unwrap_or(usize::MAX));
    write_reports(out_dir, &results)?;
    let failed = results.iter().filter(|r| !r.is_ok()).count();
    Ok(GridOutcome { results, failed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_135_cells_and_paper_ids() {
        let cells = GridSpec::default().cells();
        assert_eq!(cells.len(), 135);
        let find = |id: &str| cells.iter().find(|c| c.id == id).unwrap().config.clone();
        use ModelKind::*;
        let published = [
            ("I-26", 0.25, 5, 7, Logit),
            ("I-56", 0.5, 3, 7, Logit),
            ("I-57", 0.5, 3, 7, Lstm),
            ("I-58", 0.5, 3, 7, RandomForest),
            ("I-70", 0.5, 5, 3, Xgboost),
            ("I-71", 0.5, 5, 7, Logit),
            ("I-72", 0.5, 5, 7, Lstm),
            ("I-75", 0.5, 5, 7, Xgboost),
        ];
        for (id, rho, n_in, n_out, model) in published {
            let c = find(id);
            assert_eq!((c.event_proportion, c.n_in, c.n_out, c.model), (rho, n_in, n_out, model), "{id}");
            assert_eq!(c.features, "TL,W,GPS");
        }
    }

    #[test]
    fn summary_bounds() {
        let s = Summary::of(&[0.1, 0.2, 0.3]);
        assert!((s.mean - 0.2).abs() < 1e-15);
        assert!((s.sd - 0.1).abs() < 1e-15);
        assert_eq!((s.min, s.max), (0.1, 0.3));
        assert_eq!(Summary::of(&[0.7]).sd, 0.0);
    }

    #[test]
    fn select_filters_and_rejects_unknown_ids() {
        let grid = GridSpec::default();
        let picked = grid.select(&["I-58".into(), "I-1".into()]).unwrap();
        assert_eq!(picked.iter().map(|c| c.id.as_str()).collect::<Vec<_>>(), ["I-1", "I-58"]);
        assert_eq!(grid.select(&[]).unwrap().len(), 135);
        assert!(matches!(grid.select(&["I-136".into()]), Err(EvalError::InvalidGrid(_))));
        assert_eq!(GridSpec::round_keys(&picked), vec![(0.25, 3, 1), (0.5, 3, 7)]);
        assert_eq!(GridSpec::window_keys(&picked), vec![(3, 1), (3, 7)]);
    }
}
