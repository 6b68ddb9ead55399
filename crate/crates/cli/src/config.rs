//! The global JSON configuration shared by every command.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use loadwatch_core::evaluation::GridSpec;
use loadwatch_core::features::{LoadModel, ZoneConfig};
use loadwatch_core::ingest::{default_match_attributes, PlausibilityConfig, RosterEntry};
use loadwatch_core::models::{Hyperparameters, ModelKind};
use loadwatch_core::store::{FeatureGroup, ImputeMethod, PreprocessOptions};
use loadwatch_core::windowing::SplitBy;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Holds `gps/`, `subjective/`, `matches.csv` and `injuries.csv`.
    pub raw_dir: PathBuf,
    pub store: PathBuf,
    pub windows: PathBuf,
    pub rounds: PathBuf,
    pub models: PathBuf,
    pub results: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            raw_dir: "raw".into(),
            store: "work/store/features.csv".into(),
            windows: "work/windows".into(),
            rounds: "work/rounds".into(),
            models: "work/models".into(),
            results: "work/results".into(),
        }
    }
}

/// Window parameters shared by every (n_in, n_out) pair of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub max_span_days: i64,
    pub groups: Vec<FeatureGroup>,
    pub test_fraction: f64,
    pub rounds: usize,
    pub split_by: SplitBy,
}

impl Default for WindowSection {
    fn default() -> Self {
        let g = GridSpec::default();
        WindowSection {
            max_span_days: g.max_span_days,
            groups: g.groups,
            test_fraction: g.test_fraction,
            rounds: g.rounds,
            split_by: g.split_by,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisSection {
    /// Balanced training size as a multiple of the real training size.
    pub multiplier: f64,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        SynthesisSection { multiplier: 1.0 }
    }
}

/// The swept axes. Everything else comes from the other sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub event_proportions: Vec<f64>,
    pub n_in: Vec<usize>,
    pub n_out: Vec<usize>,
    pub models: Vec<ModelKind>,
    pub threshold: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridSpec::default();
        GridSection {
            event_proportions: g.event_proportions,
            n_in: g.n_in,
            n_out: g.n_out,
            models: g.models,
            threshold: g.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub paths: Paths,
    pub roster: Vec<RosterEntry>,
    pub plausibility: PlausibilityConfig,
    pub zones: ZoneConfig,
    pub load_model: LoadModel,
    /// `null` keeps gaps in the store.
    pub impute: Option<ImputeMethod>,
    pub match_attributes: Vec<String>,
    pub window: WindowSection,
    pub synthesis: SynthesisSection,
    pub grid: GridSection,
    pub models: Hyperparameters,
    pub seed: u64,
    pub host: String,
    pub port: u16,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        GlobalConfig {
            paths: Paths::default(),
            roster: Vec::new(),
            plausibility: PlausibilityConfig::default(),
            zones: ZoneConfig::default(),
            load_model: LoadModel::default(),
            impute: Some(ImputeMethod::Median),
            match_attributes: default_match_attributes(),
            window: WindowSection::default(),
            synthesis: SynthesisSection::default(),
            grid: GridSection::default(),
            models: Hyperparameters::default(),
            seed: 42,
            host: "127.0.0.1".into(),
            port: 8080,
        }
    }
}

impl GlobalConfig {
    /// Parses `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: GlobalConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.paths.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.grid_spec().validate().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn preprocess_options(&self) -> PreprocessOptions {
        PreprocessOptions {
            plausibility: self.plausibility.clone(),
            zones: self.zones.clone(),
            load_model: self.load_model,
            impute: self.impute,
            match_attributes: self.match_attributes.clone(),
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            event_proportions: self.grid.event_proportions.clone(),
            n_in: self.grid.n_in.clone(),
            n_out: self.grid.n_out.clone(),
            models: self.grid.models.clone(),
            groups: self.window.groups.clone(),
            rounds: self.window.rounds,
            test_fraction: self.window.test_fraction,
            max_span_days: self.window.max_span_days,
            multiplier: self.synthesis.multiplier,
            seed: self.seed,
            threshold: self.grid.threshold,
            split_by: self.window.split_by,
            hyperparameters: self.models.clone(),
        }
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.raw_dir,
            &mut self.store,
            &mut self.windows,
            &mut self.rounds,
            &mut self.models,
            &mut self.results,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg: GlobalConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, GlobalConfig::default());
        assert_eq!(cfg.grid_spec(), GridSpec::default());
    }

    #[test]
    fn unknown_keys_are_rejected_at_any_depth() {
        for text in [r#"{"sed": 1}"#, r#"{"window": {"round": 3}}"#, r#"{"models": {"lstm": {"hiden": 8}}}"#] {
            let err = serde_json::from_str::<GlobalConfig>(text).unwrap_err();
            assert!(err.to_string().contains("unknown field"), "{err}");
        }
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("cfg.json");
        fs::write(&path, r#"{"paths": {"store": "s/f.csv", "results": "/abs/out"}}"#).unwrap();
        let cfg = GlobalConfig::load(&path).unwrap();
        assert_eq!(cfg.paths.store, tmp.path().join("s/f.csv"));
        assert_eq!(cfg.paths.results, PathBuf::from("/abs/out"));
        assert_eq!(cfg.paths.raw_dir, tmp.path().join("raw"));
    }

    #[test]
    fn invalid_grid_is_a_config_error() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("cfg.json");
        fs::write(&path, r#"{"grid": {"n_in": []}}"#).unwrap();
        assert!(matches!(GlobalConfig::load(&path), Err(CliError::Config(_))));
    }
}
