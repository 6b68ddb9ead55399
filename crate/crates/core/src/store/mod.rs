//! The fused per-(player, date) feature table.

use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ingest::{InjuryEvent, PlayerId};

mod catalog;
mod fuse;
mod impute;
mod io;
mod preprocess;

pub use catalog::{FeatureCatalog, FeatureDef, FeatureGroup, FeatureKind};
pub use fuse::{fuse, FuseInputs};
pub use impute::{impute, ImputeMethod, ImputeReport};
pub use io::{read_store, write_store, OFF_SESSION_FILE};
pub use preprocess::{preprocess, PreprocessOptions, PreprocessReport, RawTables};

pub const UNKNOWN: &str = "unknown";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionType {
    Training,
    Match,
}

impl SessionType {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionType::Training => "training",
            SessionType::Match => "match",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "training" => Some(SessionType::Training),
            "match" => Some(SessionType::Match),
            _ => None,
        }
    }
}

/// One cell, aligned with a catalog feature of the same kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(Option<f64>),
    Category(String),
}

impl Value {
    pub fn number(&self) -> Option<f64> {
        match self {
            Value::Number(v) => *v,
            Value::Category(_) => None,
        }
    }
}

/// One tracked training session or match of one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub player: PlayerId,
    pub date: NaiveDate,
    pub session_type: SessionType,
    /// Aligned with [`FeatureCatalog::features`].
    pub values: Vec<Value>,
    pub injury: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    pub catalog: FeatureCatalog,
    /// Sorted by (player, date), keys unique.
    pub records: Vec<DailyRecord>,
    /// Injuries on dates without a session row.
    pub off_session_injuries: Vec<InjuryEvent>,
}

impl FeatureStore {
    pub fn value<'a>(&self, record: &'a DailyRecord, feature: &str) -> Option<&'a Value> {
        self.catalog.index_of(feature).map(|i| &record.values[i])
    }

    pub fn players(&self) -> Vec<PlayerId> {
        let mut players: Vec<PlayerId> = self.records.iter().map(|r| r.player.clone()).collect();
        players.extend(self.off_session_injuries.iter().map(|e| e.player.clone()));
        players.sort();
        players.dedup();
        players
    }

    pub fn records_of<'a>(&'a self, player: &'a PlayerId) -> impl Iterator<Item = &'a DailyRecord> + 'a {
        self.records.iter().filter(move |r| &r.player == player)
    }

    /// Every injury event: those attached to session rows plus off-session ones.
    pub fn injury_events(&self) -> Vec<InjuryEvent> {
        let cat = |r: &DailyRecord, name: &str| match self.value(r, name) {
            Some(Value::Category(s)) => s.clone(),
            _ => UNKNOWN.to_string(),
        };
        let mut events: Vec<InjuryEvent> = self
            .records
            .iter()
            .filter(|r| r.injury)
            .map(|r| InjuryEvent {
                player: r.player.clone(),
                date: r.date,
                cause: cat(r, "injury_cause"),
                activity: cat(r, "injury_activity"),
                area: cat(r, "injury_area"),
                body_region: cat(r, "injury_body_region"),
            })
            .chain(self.off_session_injuries.iter().cloned())
            .collect();
        events.sort();
        events
    }

    /// Numeric cells that are still absent.
    pub fn missing_count(&self) -> usize {
        self.records
            .iter()
            .flat_map(|r| r.values.iter())
            .filter(|v| matches!(v, Value::Number(None)))
            .count()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
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
    #[error("{path}: schema mismatch at column {position}: expected {expected:?}, found {found:?}")]
    SchemaMismatch {
        path: PathBuf,
        position: usize,
        expected: String,
        found: String,
    },
    #[error("{path}:{line}: invalid value {value:?} in column {column}")]
    InvalidCell {
        path: PathBuf,
        line: u64,
        column: String,
        value: String,
    },
    #[error("duplicate row for player {player} on {date}")]
    DuplicateKey { player: PlayerId, date: NaiveDate },
    #[error("duplicate feature name {0:?} in catalog")]
    DuplicateFeature(String),
    #[error("unknown imputation method {0:?} (expected median, linear or iterative)")]
    UnknownImputation(String),
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
}
