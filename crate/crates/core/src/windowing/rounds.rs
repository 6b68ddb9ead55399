use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{split, write_samples, WindowError, WindowSet, WindowSpec};
use crate::rng::{stream, Purpose};
use crate::synthesis::{balance, BalanceConfig, SynthesizerKind};

pub const MANIFEST_FILE: &str = "rounds.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundManifest {
    pub round: usize,
    /// Real training samples by label.
    pub train_real: [usize; 2],
    pub test: [usize; 2],
    /// Synthetic samples added to train, by label.
    pub added: [usize; 2],
    pub synthesizers: [Option<SynthesizerKind>; 2],
    pub train_event_proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundsManifest {
    pub spec: WindowSpec,
    pub balance: Option<BalanceConfig>,
    pub feature_names: Vec<String>,
    pub rounds: Vec<RoundManifest>,
}

pub fn round_dir(root: &Path, round: usize) -> PathBuf {
    root.join(format!("round_{round}"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> WindowError + '_ {
    move |source| WindowError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Clears earlier output, or refuses when `force` is off and the directory
/// holds anything.
fn prepare(out_dir: &Path, force: bool) -> Result<(), WindowError> {
    if out_dir.exists() {
        let mut entries = fs::read_dir(out_dir).map_err(io_err(out_dir))?.peekable();
        if entries.peek().is_some() {
            if !force {
                return Err(WindowError::TargetNotEmpty(out_dir.to_path_buf()));
            }
            for entry in entries {
                let entry = entry.map_err(io_err(out_dir))?;
                let name = entry.file_name();
                let name = name.to_string_lossy();
                if name.starts_with("round_") && entry.path().is_dir() {
                    fs::remove_dir_all(entry.path()).map_err(io_err(out_dir))?;
                } else if name == MANIFEST_FILE {
                    fs::remove_file(entry.path()).map_err(io_err(out_dir))?;
                }
            }
        }
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))
}

/// Splits `set` once per round, augments each training part when `balance`
/// is given, and writes `round_<k>/{train,test}.csv` plus a manifest.
pub fn materialize_rounds(
    set: &WindowSet,
    spec: &WindowSpec,
    balance_cfg: Option<&BalanceConfig>,
    out_dir: &Path,
    force: bool,
) -> Result<RoundsManifest, WindowError> {
    spec.validate()?;
    if let Some(cfg) = balance_cfg {
        cfg.validate()?;
    }
    prepare(out_dir, force)?;
    let rounds = (0..spec.rounds)
        .into_par_iter()
        .map(|k| -> Result<RoundManifest, WindowError> {
            let parts = split(&set.samples, spec, k)?;
            let train: Vec<_> = parts.train.iter().map(|&i| set.samples[i].clone()).collect();
            let test: Vec<_> = parts.test.iter().map(|&i| set.samples[i].clone()).collect();
            let train_set = set.with_samples(train);
            let test_set = set.with_samples(test);
            let train_real = train_set.class_counts();
            let (train_set, added, synthesizers) = match balance_cfg {
                Some(cfg) => {
                    let mut rng = stream(spec.seed, Purpose::Synthesis, k as u64);
                    let out = balance(&train_set.samples, cfg, &mut rng)?;
                    (set.with_samples(out.samples), out.added, out.synthesizers)
                }
                None => (train_set, [0, 0], [None, None]),
            };
            let dir = round_dir(out_dir, k);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            write_samples(&dir.join("train.csv"), &train_set, false)?;
            write_samples(&dir.join("test.csv"), &test_set, false)?;
            let counts = train_set.class_counts();
            Ok(RoundManifest {
                round: k,
                train_real,
                test: test_set.class_counts(),
                added,
                synthesizers,
                train_event_proportion: counts[1] as f64 / train_set.samples.len() as f64,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = RoundsManifest {
        spec: spec.clone(),
        balance: balance_cfg.copied(),
        feature_names: set.feature_names.clone(),
        rounds,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(io_err(&path))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::PlayerId;
    use crate::windowing::{read_samples, Provenance, WindowSample};
    use chrono::NaiveDate;

    fn set(neg: usize, pos: usize) -> WindowSet {
        let d = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let samples = (0..neg + pos)
            .map(|i| WindowSample {
                player: PlayerId::new(format!("p{}", i % 4)).unwrap(),
                anchor_date: d + chrono::Days::new(i as u64),
                x: vec![i as f64 * 0.5, (i % 3) as f64],
                label: u8::from(i % 5 == 0 && i / 5 < pos),
                provenance: Provenance::Real,
            })
            .collect();
        WindowSet {
            feature_names: vec!["a_1".into(), "b_1".into()],
            n_steps: 1,
            samples,
        }
    }

    fn spec(rounds: usize) -> WindowSpec {
        WindowSpec {
            rounds,
            n_in: 1,
            ..Default::default()
        }
    }

    #[test]
    fn layout_and_refusal() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("rounds");
        let s = set(40, 10);
        materialize_rounds(&s, &spec(2), None, &out, false).unwrap();
        let dirs: Vec<_> = fs::read_dir(&out)
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .collect();
        assert_eq!(dirs.len(), 2);
        for k in 0..2 {
            assert!(round_dir(&out, k).join("train.csv").is_file());
            assert!(round_dir(&out, k).join("test.csv").is_file());
        }
        assert!(matches!(
            materialize_rounds(&s, &spec(2), None, &out, false),
            Err(WindowError::TargetNotEmpty(_))
        ));
        materialize_rounds(&s, &spec(1), None, &out, true).unwrap();
        assert!(!round_dir(&out, 1).exists());
    }

    #[test]
    fn rerun_is_bit_identical_and_test_stays_real() {
        let tmp = tempfile::tempdir().unwrap();
        let s = set(60, 12);
        let cfg = BalanceConfig {
            event_proportion: 0.5,
            multiplier: 2.0,
        };
        let a = tmp.path().join("a");
        let b = tmp.path().join("b");
        let ma = materialize_rounds(&s, &spec(3), Some(&cfg), &a, false).unwrap();
        materialize_rounds(&s, &spec(3), Some(&cfg), &b, false).unwrap();
        for k in 0..3 {
            for f in ["train.csv", "test.csv"] {
                let x = fs::read(round_dir(&a, k).join(f)).unwrap();
                let y = fs::read(round_dir(&b, k).join(f)).unwrap();
                assert_eq!(x, y);
            }
            let test = read_samples(&round_dir(&a, k).join("test.csv")).unwrap();
            assert!(test.samples.iter().all(|s| s.provenance == Provenance::Real));
            let train = read_samples(&round_dir(&a, k).join("train.csv")).unwrap();
            assert!(train.samples.iter().any(|s| s.provenance == Provenance::Synthetic));
            assert!((ma.rounds[k].train_event_proportion - 0.5).abs() <= 1.0 / train.samples.len() as f64);
        }
    }
}
