//! The pipeline commands. Each reads only the outputs of earlier stages and
//! leaves a manifest next to what it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use loadwatch_core::evaluation::{
    confusion, evaluate_cells, read_results_json, roc, round_seed, rounds_dir, windows_file, write_reports,
    RoundMetrics,
};
use loadwatch_core::fixture::{FixtureSpec, RawFixture, GPS_DIR, INJURIES_FILE, MATCHES_FILE, SUBJECTIVE_DIR};
use loadwatch_core::ingest::{read_gps, read_injury_reports, read_match_stats, read_subjective};
use loadwatch_core::models::{classify_score, train};
use loadwatch_core::store::{preprocess, read_store, write_store, FeatureCatalog, FeatureStore, RawTables, OFF_SESSION_FILE};
use loadwatch_core::windowing::{build_windows, materialize_rounds, read_samples, round_dir, write_samples, RoundsManifest};
use loadwatch_core::{Dataset, Model};

use crate::config::{GlobalConfig, Paths};
use crate::manifest::{Produced, Stage, StageManifest, MANIFEST_SUFFIX};
use crate::CliError;

pub const REPORT_FILE: &str = "preprocess_report.json";
pub const RESULTS_JSON: &str = "results.json";
pub const RESULTS_CSV: &str = "results.csv";

fn stage_err(e: impl std::fmt::Display) -> CliError {
    CliError::Stage(e.to_string())
}

fn manifest_path(dir: &Path, stage: &str) -> PathBuf {
    dir.join(format!("{stage}{MANIFEST_SUFFIX}"))
}

/// Fails with a message naming the command that produces `path`.
fn require(path: &Path, what: &str, command: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Stage(format!(
            "{what} not found at {}; run `loadwatch {command}` first",
            path.display()
        )))
    }
}

fn snapshot<T: serde::Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("config serializes")
}

fn store_dir(paths: &Paths) -> PathBuf {
    paths.store.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn load_store(cfg: &GlobalConfig) -> Result<FeatureStore, CliError> {
    require(&cfg.paths.store, "feature store", "preprocess")?;
    let catalog = FeatureCatalog::standard(&cfg.match_attributes).map_err(|e| CliError::Config(e.to_string()))?;
    read_store(&cfg.paths.store, &catalog).map_err(stage_err)
}

pub fn preprocess_cmd(cfg: &GlobalConfig, force: bool) -> Result<StageManifest, CliError> {
    let raw = &cfg.paths.raw_dir;
    let gps = raw.join(GPS_DIR);
    let subjective = raw.join(SUBJECTIVE_DIR);
    let matches = raw.join(MATCHES_FILE);
    let injuries = raw.join(INJURIES_FILE);
    for p in [&gps, &subjective, &matches, &injuries] {
        if !p.exists() {
            return Err(CliError::Config(format!("raw input {} does not exist", p.display())));
        }
    }
    if cfg.roster.is_empty() {
        log::warn!("roster is empty; no injury report can be linked");
    }
    let dir = store_dir(&cfg.paths);
    let opts = cfg.preprocess_options();
    Stage {
        name: "preprocess",
        manifest_path: &manifest_path(&dir, "preprocess"),
        inputs: vec![
            ("gps".into(), &gps),
            ("subjective".into(), &subjective),
            ("matches".into(), &matches),
            ("injuries".into(), &injuries),
        ],
        config: json!({"options": snapshot(&opts), "roster": snapshot(&cfg.roster)}),
        force,
    }
    .execute(|| {
        let tables = RawTables {
            subjective: read_subjective(&subjective).map_err(stage_err)?,
            matches: read_match_stats(&matches, &opts.match_attributes).map_err(stage_err)?,
            injury_rows: read_injury_reports(&injuries).map_err(stage_err)?,
            roster: cfg.roster.clone(),
        };
        let reader = read_gps(&gps).map_err(stage_err)?;
        let (store, report) = preprocess(reader, &tables, &opts).map_err(stage_err)?;
        write_store(&store, &cfg.paths.store).map_err(stage_err)?;
        let report_path = dir.join(REPORT_FILE);
        fs::write(&report_path, serde_json::to_string_pretty(&report).expect("report serializes")).map_err(stage_err)?;
        for u in &report.unmatched_injuries {
            log::warn!("unlinked injury report {:?} on {}: {:?}", u.row.name, u.row.date, u.reason);
        }
        Ok(Produced {
            summary: json!({
                "records": report.records,
                "retention": report.retention.retention(),
                "injuries_linked": report.injuries_linked,
                "unmatched_injuries": report.unmatched_injuries.len(),
                "off_session_injuries": report.off_session_injuries,
                "missing_after": store.missing_count(),
            }),
            outputs: vec![cfg.paths.store.clone(), dir.join(OFF_SESSION_FILE), report_path],
        })
    })
}

pub fn build_windows_cmd(cfg: &GlobalConfig, force: bool) -> Result<StageManifest, CliError> {
    require(&cfg.paths.store, "feature store", "preprocess")?;
    let grid = cfg.grid_spec();
    let keys = loadwatch_core::evaluation::GridSpec::window_keys(&grid.cells());
    let out = &cfg.paths.windows;
    Stage {
        name: "build-windows",
        manifest_path: &manifest_path(out, "build-windows"),
        inputs: vec![("store".into(), &cfg.paths.store)],
        config: json!({"window": snapshot(&cfg.window), "pairs": keys, "seed": cfg.seed}),
        force,
    }
    .execute(|| {
        let store = load_store(cfg)?;
        fs::create_dir_all(out).map_err(stage_err)?;
        let mut outputs = Vec::new();
        let mut counts = serde_json::Map::new();
        for &(i, o) in &keys {
            let set = build_windows(&store, &grid.window_spec(i, o)).map_err(stage_err)?;
            let path = windows_file(out, i, o);
            write_samples(&path, &set, true).map_err(stage_err)?;
            counts.insert(format!("in{i}_out{o}"), json!(set.class_counts()));
            outputs.push(path);
        }
        Ok(Produced {
            summary: json!({ "class_counts": counts }),
            outputs,
        })
    })
}

pub fn synth_cmd(cfg: &GlobalConfig, force: bool) -> Result<StageManifest, CliError> {
    let grid = cfg.grid_spec();
    let cells = grid.cells();
    let window_keys = loadwatch_core::evaluation::GridSpec::window_keys(&cells);
    let round_keys = loadwatch_core::evaluation::GridSpec::round_keys(&cells);
    let files: Vec<(String, PathBuf)> = window_keys
        .iter()
        .map(|&(i, o)| (format!("in{i}_out{o}"), windows_file(&cfg.paths.windows, i, o)))
        .collect();
    for (_, f) in &files {
        require(f, "window file", "build-windows")?;
    }
    let out = &cfg.paths.rounds;
    Stage {
        name: "synth",
        manifest_path: &manifest_path(out, "synth"),
        inputs: files.iter().map(|(k, p)| (k.clone(), p.as_path())).collect(),
        config: json!({
            "window": snapshot(&cfg.window),
            "synthesis": snapshot(&cfg.synthesis),
            "event_proportions": cfg.grid.event_proportions,
            "seed": cfg.seed,
        }),
        force,
    }
    .execute(|| {
        let mut outputs = Vec::new();
        let mut summary = serde_json::Map::new();
        for &(rho, i, o) in &round_keys {
            let set = read_samples(&windows_file(&cfg.paths.windows, i, o)).map_err(stage_err)?;
            let dir = rounds_dir(out, rho, i, o);
            let m: RoundsManifest =
                materialize_rounds(&set, &grid.window_spec(i, o), Some(&grid.balance(rho)), &dir, force)
                    .map_err(stage_err)?;
            let added: Vec<[usize; 2]> = m.rounds.iter().map(|r| r.added).collect();
            let fallback = m.rounds.iter().flat_map(|r| r.synthesizers).flatten().any(|k| {
                k == loadwatch_core::synthesis::SynthesizerKind::Jitter
            });
            let name = dir.file_name().expect("named dir").to_string_lossy().into_owned();
            summary.insert(name, json!({"added": added, "jitter_fallback": fallback}));
            outputs.push(dir);
        }
        Ok(Produced {
            summary: serde_json::Value::Object(summary),
            outputs,
        })
    })
}

pub fn grid_cmd(cfg: &GlobalConfig, cells: &[String], force: bool) -> Result<StageManifest, CliError> {
    let grid = cfg.grid_spec();
    let selected = grid.select(cells).map_err(|e| CliError::Config(e.to_string()))?;
    let dirs: Vec<(String, PathBuf)> = loadwatch_core::evaluation::GridSpec::round_keys(&selected)
        .into_iter()
        .map(|(rho, i, o)| {
            let d = rounds_dir(&cfg.paths.rounds, rho, i, o);
            (d.file_name().expect("named dir").to_string_lossy().into_owned(), d)
        })
        .collect();
    for (_, d) in &dirs {
        require(d, "rounds", "synth")?;
    }
    let out = &cfg.paths.results;
    let ids: Vec<&str> = selected.iter().map(|c| c.id.as_str()).collect();
    let manifest = Stage {
        name: "grid",
        manifest_path: &manifest_path(out, "grid"),
        inputs: dirs.iter().map(|(k, p)| (k.clone(), p.as_path())).collect(),
        config: json!({"grid": snapshot(&grid), "cells": ids}),
        force,
    }
    .execute(|| {
        let results = evaluate_cells::<f64>(&grid, &selected, &cfg.paths.rounds);
        write_reports(out, &results).map_err(stage_err)?;
        let failed: Vec<&str> = results.iter().filter(|r| !r.is_ok()).map(|r| r.id.as_str()).collect();
        for r in results.iter().filter(|r| !r.is_ok()) {
            log::warn!("{}: {}", r.id, r.error.as_deref().unwrap_or_default());
        }
        let mut outputs = vec![out.join(RESULTS_CSV), out.join(RESULTS_JSON)];
        outputs.extend(results.iter().filter(|r| r.is_ok()).map(|r| out.join("cells").join(&r.id)));
        Ok(Produced {
            summary: json!({"cells": results.len(), "failed": failed}),
            outputs,
        })
    })?;
    let failed = manifest.summary["failed"].as_array().map_or(0, Vec::len);
    if failed > 0 && failed == selected.len() {
        return Err(CliError::Stage("every selected cell failed".into()));
    }
    Ok(manifest)
}

fn cell_rounds(cfg: &GlobalConfig, cell: &str, round: usize) -> Result<(loadwatch_core::evaluation::Cell, PathBuf), CliError> {
    let grid = cfg.grid_spec();
    let found = grid.select(&[cell.to_string()]).map_err(|e| CliError::Config(e.to_string()))?;
    let c = found.into_iter().next().expect("one cell selected");
    if round >= grid.rounds {
        return Err(CliError::Config(format!("round {round} out of range; the config has {} rounds", grid.rounds)));
    }
    let dir = round_dir(
        &rounds_dir(&cfg.paths.rounds, c.config.event_proportion, c.config.n_in, c.config.n_out),
        round,
    );
    require(&dir, "round directory", "synth")?;
    Ok((c, dir))
}

/// Trains the cell's model on one round's training split and saves it.
pub fn train_cmd(cfg: &GlobalConfig, cell: &str, round: usize, force: bool) -> Result<StageManifest, CliError> {
    let (c, dir) = cell_rounds(cfg, cell, round)?;
    let train_csv = dir.join("train.csv");
    let mut model_cfg = cfg.grid_spec().model_config(c.config.model);
    model_cfg.seed = round_seed(cfg.seed, round);
    let out = &cfg.paths.models;
    Stage {
        name: "train",
        manifest_path: &manifest_path(out, &format!("train_{cell}_round{round}")),
        inputs: vec![("train".into(), &train_csv)],
        config: json!({"cell": cell, "round": round, "model": snapshot(&model_cfg)}),
        force,
    }
    .execute(|| {
        let set = read_samples(&train_csv).map_err(stage_err)?;
        let model = train(&Dataset::from_window_set(&set), &model_cfg).map_err(stage_err)?;
        fs::create_dir_all(out).map_err(stage_err)?;
        let path = model.save(out).map_err(stage_err)?;
        let id = path.file_stem().expect("file name").to_string_lossy().into_owned();
        Ok(Produced {
            summary: json!({
                "model_id": id,
                "kind": model.kind(),
                "n_in": model.n_steps,
                "class_counts": model.manifest.class_counts,
                "final_loss": model.manifest.final_loss,
            }),
            outputs: vec![path],
        })
    })
}

/// Scores a saved model on one round's test split.
pub fn evaluate_cmd(cfg: &GlobalConfig, model_path: &Path, cell: &str, round: usize, force: bool) -> Result<StageManifest, CliError> {
    require(model_path, "model", "train")?;
    let (_, dir) = cell_rounds(cfg, cell, round)?;
    let test_csv = dir.join("test.csv");
    let stem = model_path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    let out = cfg.paths.results.join("evaluate");
    let threshold = cfg.grid.threshold;
    let name = format!("{stem}_{cell}_round{round}");
    Stage {
        name: "evaluate",
        manifest_path: &manifest_path(&out, &name),
        inputs: vec![("model".into(), model_path), ("test".into(), &test_csv)],
        config: json!({"cell": cell, "round": round, "threshold": threshold}),
        force,
    }
    .execute(|| {
        let model = Model::load(model_path).map_err(stage_err)?;
        let test = Dataset::from_window_set(&read_samples(&test_csv).map_err(stage_err)?);
        let scores = model.score_all(&test.x).map_err(stage_err)?;
        let predicted: Vec<u8> = scores.iter().map(|&s| classify_score(s, threshold)).collect();
        let cm = confusion(&test.y, &predicted).map_err(stage_err)?;
        let curve = roc(&test.y, &scores).map_err(stage_err)?;
        let metrics = RoundMetrics {
            round,
            confusion: cm,
            precision: cm.precision(),
            tpr: cm.tpr(),
            tnr: cm.tnr(),
            f1: cm.f1(),
            auc: curve.auc,
            roc: curve,
        };
        fs::create_dir_all(&out).map_err(stage_err)?;
        let path = out.join(format!("{name}.json"));
        fs::write(&path, serde_json::to_string_pretty(&metrics).expect("metrics serialize")).map_err(stage_err)?;
        Ok(Produced {
            summary: json!({
                "precision": metrics.precision,
                "tpr": metrics.tpr,
                "f1": metrics.f1,
                "auc": metrics.auc,
            }),
            outputs: vec![path],
        })
    })
}

/// Writes a synthetic raw dataset plus a config pointing at it.
pub fn fixture_cmd(out: &Path, spec: &FixtureSpec) -> Result<PathBuf, CliError> {
    let f = RawFixture::generate(spec);
    f.write(&out.join("raw")).map_err(stage_err)?;
    let cfg = GlobalConfig {
        roster: f.roster.clone(),
        zones: f.zones(),
        seed: spec.seed,
        ..Default::default()
    };
    let path = out.join("loadwatch.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).expect("config serializes")).map_err(stage_err)?;
    Ok(path)
}

/// Loads grid results when they exist.
pub fn load_results(cfg: &GlobalConfig) -> Result<Vec<loadwatch_core::evaluation::ExperimentResult>, CliError> {
    let path = cfg.paths.results.join(RESULTS_JSON);
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_results_json(&path).map_err(stage_err)
}
