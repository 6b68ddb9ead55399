//! Raw source readers: subjective reports, GPS telemetry, match statistics
//! and medical injury reports.

use std::fmt;
use std::path::PathBuf;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

mod gps;
mod injuries;
mod levenshtein;
mod matches;
mod plausibility;
mod subjective;

pub use gps::{parse_session_file_name, read_gps, write_gps_session, GpsReader, GpsSession};
pub use injuries::{
    body_region, link_injuries, read_injury_reports, write_injury_reports, InjuryLinkage,
    RosterEntry, UnmatchedInjury, UnmatchedReason,
};
pub use levenshtein::levenshtein;
pub use matches::{default_match_attributes, read_match_stats, write_match_stats};
pub use plausibility::{
    filter_plausible, PlausibilityConfig, PlausibilityFilter, PlausibilityRule, RetentionStats,
};
pub use subjective::{read_subjective, write_subjective, SubjectiveField};

pub(crate) const DATE_FORMAT: &str = "%Y-%m-%d";

/// Athlete identity shared by every source after linking.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(String);

impl PlayerId {
    pub fn new(id: impl Into<String>) -> Result<Self, IngestError> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(IngestError::EmptyPlayerId);
        }
        Ok(PlayerId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One raw telemetry point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpsSample {
    pub player: PlayerId,
    pub timestamp: DateTime<Utc>,
    pub lat: f64,
    pub lon: f64,
    pub speed_kmh: f64,
    pub heart_rate_bpm: Option<f64>,
    pub satellites: Option<u32>,
    pub hdop: Option<f64>,
}

/// Pivoted subjective wellness and load report for one player-day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectiveReport {
    pub player: PlayerId,
    pub date: NaiveDate,
    pub rpe: Option<u8>,
    pub duration_min: Option<f64>,
    pub fatigue: Option<u8>,
    pub mood: Option<u8>,
    pub readiness: Option<u8>,
    pub soreness: Option<u8>,
    pub stress: Option<u8>,
    pub sleep_duration_h: Option<f64>,
    pub sleep_quality: Option<u8>,
}

impl SubjectiveReport {
    pub fn new(player: PlayerId, date: NaiveDate) -> Self {
        SubjectiveReport {
            player,
            date,
            rpe: None,
            duration_min: None,
            fatigue: None,
            mood: None,
            readiness: None,
            soreness: None,
            stress: None,
            sleep_duration_h: None,
            sleep_quality: None,
        }
    }

    pub fn get(&self, field: SubjectiveField) -> Option<f64> {
        use SubjectiveField::*;
        match field {
            Rpe => self.rpe.map(f64::from),
            DurationMin => self.duration_min,
            Fatigue => self.fatigue.map(f64::from),
            Mood => self.mood.map(f64::from),
            Readiness => self.readiness.map(f64::from),
            Soreness => self.soreness.map(f64::from),
            Stress => self.stress.map(f64::from),
            SleepDurationH => self.sleep_duration_h,
            SleepQuality => self.sleep_quality.map(f64::from),
        }
    }

    pub fn is_empty(&self) -> bool {
        SubjectiveField::ALL.iter().all(|f| self.get(*f).is_none())
    }
}

/// Per-match statistics of one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchStats {
    pub player: PlayerId,
    pub date: NaiveDate,
    /// Values aligned with the configured attribute catalog.
    pub values: Vec<f64>,
}

/// A medical report row before name linking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawInjuryRow {
    pub name: String,
    pub date: NaiveDate,
    pub cause: String,
    pub activity: String,
    pub area: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InjuryEvent {
    pub player: PlayerId,
    pub date: NaiveDate,
    pub cause: String,
    pub activity: String,
    pub area: String,
    pub body_region: String,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
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
    #[error("{path}:{line}: malformed date {value:?}")]
    MalformedDate {
        path: PathBuf,
        line: u64,
        value: String,
    },
    #[error("{path}:{line}: invalid value {value:?} for {field}")]
    InvalidValue {
        path: PathBuf,
        line: u64,
        field: String,
        value: String,
    },
    #[error("duplicate {feature} entry for player {player} on {date}")]
    Duplicate {
        player: PlayerId,
        date: NaiveDate,
        feature: String,
    },
    #[error("{path}: missing column {column:?}")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: unexpected column {found:?} at position {position}, expected {expected:?}")]
    UnexpectedColumn {
        path: PathBuf,
        position: usize,
        expected: String,
        found: String,
    },
    #[error("{path}: file name does not match {pattern}")]
    BadFileName { path: PathBuf, pattern: &'static str },
    #[error("player id must be non-empty")]
    EmptyPlayerId,
}

impl IngestError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        IngestError::Csv {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn parse_date(
    raw: &str,
    path: &std::path::Path,
    line: u64,
) -> Result<NaiveDate, IngestError> {
    NaiveDate::parse_from_str(raw.trim(), DATE_FORMAT).map_err(|_| IngestError::MalformedDate {
        path: path.to_path_buf(),
        line,
        value: raw.to_string(),
    })
}

/// Parses a finite float, rejecting `NaN`/`inf` spellings.
pub(crate) fn parse_finite(raw: &str) -> Option<f64> {
    raw.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}
