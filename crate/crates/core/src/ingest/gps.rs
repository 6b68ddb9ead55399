//! Per-session telemetry CSVs named `<player>_<date>_<session>.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};

use super::{parse_finite, GpsSample, IngestError, PlayerId, DATE_FORMAT};

const FILE_PATTERN: &str = "<player>_<YYYY-MM-DD>_<session>.csv";
const MANDATORY: [&str; 4] = ["timestamp", "lat", "lon", "speed_kmh"];
pub const GPS_HEADER: [&str; 7] = [
    "timestamp",
    "lat",
    "lon",
    "speed_kmh",
    "heart_rate_bpm",
    "satellites",
    "hdop",
];

/// All samples of one player-session file, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct GpsSession {
    pub player: PlayerId,
    pub date: NaiveDate,
    pub session: String,
    pub samples: Vec<GpsSample>,
}

/// Splits `<player>_<date>_<session>`; the player id may itself contain `_`.
pub fn parse_session_file_name(path: &Path) -> Result<(PlayerId, NaiveDate, String), IngestError> {
    let bad = || IngestError::BadFileName {
        path: path.to_path_buf(),
        pattern: FILE_PATTERN,
    };
    let stem = path.file_stem().and_then(|s| s.to_str()).ok_or_else(bad)?;
    let mut parts = stem.rsplitn(3, '_');
    let session = parts.next().ok_or_else(bad)?;
    let date = parts.next().ok_or_else(bad)?;
    let player = parts.next().ok_or_else(bad)?;
    let date = NaiveDate::parse_from_str(date, DATE_FORMAT).map_err(|_| bad())?;
    if session.is_empty() {
        return Err(bad());
    }
    Ok((PlayerId::new(player)?, date, session.to_string()))
}

/// Lazily parses session files one at a time.
///
/// Unparsable rows are skipped and counted; a file missing a mandatory column
/// is a hard error.
pub struct GpsReader {
    files: std::vec::IntoIter<PathBuf>,
    skipped: u64,
}

pub fn read_gps(dir: &Path) -> Result<GpsReader, IngestError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| IngestError::io(dir, e))? {
        let path = entry.map_err(|e| IngestError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(GpsReader {
        files: files.into_iter(),
        skipped: 0,
    })
}

impl GpsReader {
    /// Rows skipped so far across all files.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    fn read_file(&mut self, path: &Path) -> Result<GpsSession, IngestError> {
        let (player, date, session) = parse_session_file_name(path)?;
        let mut reader = csv::Reader::from_path(path).map_err(|e| IngestError::csv(path, e))?;
        let headers = reader
            .headers()
            .map_err(|e| IngestError::csv(path, e))?
            .clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        for name in MANDATORY {
            if col(name).is_none() {
                return Err(IngestError::MissingColumn {
                    path: path.to_path_buf(),
                    column: name.into(),
                });
            }
        }
        let idx: Vec<Option<usize>> = GPS_HEADER.iter().map(|n| col(n)).collect();

        let mut samples = Vec::new();
        let mut record = csv::StringRecord::new();
        loop {
            match reader.read_record(&mut record) {
                Ok(false) => break,
                Ok(true) => {}
                Err(e) => {
                    log::warn!("{}: skipping unreadable row: {e}", path.display());
                    self.skipped += 1;
                    continue;
                }
            }
            match parse_row(&record, &idx, &player) {
                Some(sample) => samples.push(sample),
                None => {
                    let line = record.position().map_or(0, |p| p.line());
                    log::warn!("{}:{line}: skipping malformed GPS row", path.display());
                    self.skipped += 1;
                }
            }
        }
        Ok(GpsSession {
            player,
            date,
            session,
            samples,
        })
    }
}

impl Iterator for GpsReader {
    type Item = Result<GpsSession, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        let path = self.files.next()?;
        Some(self.read_file(&path))
    }
}

fn parse_row(record: &csv::StringRecord, idx: &[Option<usize>], player: &PlayerId) -> Option<GpsSample> {
    let cell = |i: usize| idx[i].and_then(|c| record.get(c)).map(str::trim);
    let optional = |i: usize| -> Option<Option<f64>> {
        match cell(i) {
            None | Some("") => Some(None),
            Some(raw) => parse_finite(raw).map(Some),
        }
    };
    let timestamp = DateTime::parse_from_rfc3339(cell(0)?).ok()?.with_timezone(&Utc);
    let satellites = match cell(5) {
        None | Some("") => None,
        Some(raw) => Some(raw.parse::<u32>().ok()?),
    };
    Some(GpsSample {
        player: player.clone(),
        timestamp,
        lat: parse_finite(cell(1)?)?,
        lon: parse_finite(cell(2)?)?,
        speed_kmh: parse_finite(cell(3)?)?,
        heart_rate_bpm: optional(4)?,
        satellites,
        hdop: optional(6)?,
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes one session file into `dir` using the canonical name and header.
pub fn write_gps_session(dir: &Path, session: &GpsSession) -> Result<PathBuf, IngestError> {
    fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
    let path = dir.join(format!(
        "{}_{}_{}.csv",
        session.player,
        session.date.format(DATE_FORMAT),
        session.session
    ));
    let mut w = csv::Writer::from_path(&path).map_err(|e| IngestError::csv(&path, e))?;
    w.write_record(GPS_HEADER)
        .map_err(|e| IngestError::csv(&path, e))?;
    for s in &session.samples {
        w.write_record([
            s.timestamp.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string(),
            s.lat.to_string(),
            s.lon.to_string(),
            s.speed_kmh.to_string(),
            opt(s.heart_rate_bpm),
            opt(s.satellites),
            opt(s.hdop),
        ])
        .map_err(|e| IngestError::csv(&path, e))?;
    }
    w.flush().map_err(|e| IngestError::io(&path, e))?;
    Ok(path)
}
