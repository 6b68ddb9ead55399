//! Stage manifests: content hashes of inputs and outputs, the config
//! snapshot a stage ran with, and timings. Equal hashes mean a rerun can be
//! skipped.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::CliError;

pub const MANIFEST_SUFFIX: &str = ".manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub versions: BTreeMap<String, String>,
    /// Input label to content hash.
    pub inputs: BTreeMap<String, String>,
    pub input_hash: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    /// Output path relative to the manifest directory, to content hash.
    pub outputs: BTreeMap<String, String>,
    pub started_at: String,
    pub elapsed_ms: u64,
    pub cache_hit: bool,
    pub summary: serde_json::Value,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Stage(format!("i/o error on {}: {e}", path.display()))
}

fn hash_file(path: &Path, hasher: &mut Sha256) -> Result<(), CliError> {
    let mut f = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| io_err(path, e))?;
        if n == 0 {
            return Ok(());
        }
        hasher.update(&buf[..n]);
    }
}

/// SHA-256 of a file, or of a directory tree: every regular file in path
/// order, each prefixed by its relative path. Manifest files are skipped.
pub fn hash_path(path: &Path) -> Result<String, CliError> {
    let mut hasher = Sha256::new();
    if path.is_file() {
        hash_file(path, &mut hasher)?;
    } else {
        for entry in WalkDir::new(path).sort_by_file_name() {
            let entry = entry.map_err(|e| CliError::Stage(e.to_string()))?;
            let name = entry.file_name().to_string_lossy();
            if !entry.file_type().is_file() || name.ends_with(MANIFEST_SUFFIX) {
                continue;
            }
            let rel = entry.path().strip_prefix(path).unwrap_or(entry.path());
            hasher.update(rel.to_string_lossy().as_bytes());
            hasher.update([0]);
            hash_file(entry.path(), &mut hasher)?;
        }
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn hash_json(value: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

fn combined(hashes: &BTreeMap<String, String>) -> String {
    let mut hasher = Sha256::new();
    for (k, v) in hashes {
        hasher.update(k.as_bytes());
        hasher.update([0]);
        hasher.update(v.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// One stage invocation. `run` does the work when the cache misses; the
/// outputs it reports are hashed afterwards.
pub struct Stage<'a> {
    pub name: &'a str,
    /// Where the manifest is written; outputs are recorded relative to its
    /// directory.
    pub manifest_path: &'a Path,
    pub inputs: Vec<(String, &'a Path)>,
    pub config: serde_json::Value,
    pub force: bool,
}

/// What a stage produced: a summary for the manifest and the paths it wrote.
pub struct Produced {
    pub summary: serde_json::Value,
    pub outputs: Vec<PathBuf>,
}

impl Stage<'_> {
    fn base(&self) -> &Path {
        self.manifest_path.parent().unwrap_or(Path::new("."))
    }

    fn hash_outputs(&self, outputs: &[PathBuf]) -> Result<BTreeMap<String, String>, CliError> {
        let mut out = BTreeMap::new();
        for p in outputs {
            if !p.exists() {
                return Err(CliError::Stage(format!("{}: output {} was not written", self.name, p.display())));
            }
            let key = p.strip_prefix(self.base()).unwrap_or(p).to_string_lossy().into_owned();
            out.insert(key, hash_path(p)?);
        }
        Ok(out)
    }

    /// True when every recorded output still exists with the recorded hash.
    fn outputs_intact(&self, recorded: &BTreeMap<String, String>) -> Result<bool, CliError> {
        for (key, hash) in recorded {
            let p = self.base().join(key);
            if !p.exists() || hash_path(&p)? != *hash {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn execute(self, run: impl FnOnce() -> Result<Produced, CliError>) -> Result<StageManifest, CliError> {
        let clock = Instant::now();
        let started_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
        let mut inputs = BTreeMap::new();
        for (label, path) in &self.inputs {
            inputs.insert(label.clone(), hash_path(path)?);
        }
        let input_hash = combined(&inputs);
        let config_hash = hash_json(&self.config);

        let previous: Option<StageManifest> = fs::read_to_string(self.manifest_path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok());
        let cached = match &previous {
            Some(m) if !self.force && m.input_hash == input_hash && m.config_hash == config_hash => {
                self.outputs_intact(&m.outputs)?
            }
            _ => false,
        };

        let (summary, outputs) = if cached {
            let m = previous.expect("checked above");
            log::info!("{}: inputs and config unchanged, reusing outputs", self.name);
            (m.summary, m.outputs)
        } else {
            let produced = run()?;
            (produced.summary, self.hash_outputs(&produced.outputs)?)
        };

        let manifest = StageManifest {
            stage: self.name.to_string(),
            versions: BTreeMap::from([("loadwatch".to_string(), env!("CARGO_PKG_VERSION").to_string())]),
            inputs,
            input_hash,
            config: self.config,
            config_hash,
            outputs,
            started_at,
            elapsed_ms: clock.elapsed().as_millis() as u64,
            cache_hit: cached,
            summary,
        };
        if let Some(dir) = self.manifest_path.parent() {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(self.manifest_path, json).map_err(|e| io_err(self.manifest_path, e))?;
        Ok(manifest)
    }
}
