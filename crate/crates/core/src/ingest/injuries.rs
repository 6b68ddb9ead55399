//! Medical report ingestion and name-based linking to player identities.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{levenshtein, parse_date, IngestError, InjuryEvent, PlayerId, RawInjuryRow, DATE_FORMAT};

const INJURY_HEADER: [&str; 5] = ["name", "date", "cause", "activity", "area"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosterEntry {
    pub id: PlayerId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnmatchedReason {
    /// Closest name is farther than the acceptance cutoff.
    TooDistant,
    /// Two or more roster entries share the minimal distance.
    Tie,
    EmptyRoster,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnmatchedInjury {
    pub row: RawInjuryRow,
    pub reason: UnmatchedReason,
    /// (id, canonical name, distance) of the closest roster entries.
    pub candidates: Vec<(PlayerId, String, usize)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjuryLinkage {
    pub events: Vec<InjuryEvent>,
    pub unmatched: Vec<UnmatchedInjury>,
}

/// Case-folded, whitespace-collapsed form used for matching.
fn normalize(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Maps an injured area to its body region; unknown areas map to `"unknown"`.
pub fn body_region(area: &str) -> &'static str {
    match normalize(area).as_str() {
        "head" | "face" | "eye" | "nose" | "jaw" | "neck" => "head_neck",
        "shoulder" | "upper arm" | "arm" | "elbow" | "forearm" | "wrist" | "hand" | "finger"
        | "thumb" => "upper_limb",
        "chest" | "ribs" | "abdomen" | "back" | "upper back" | "lower back" | "spine"
        | "sternum" => "trunk",
        "hip" | "groin" | "pelvis" | "buttock" => "hip_groin",
        "thigh" | "hamstring" | "quadriceps" | "knee" | "lower leg" | "calf" | "shin"
        | "achilles" | "ankle" | "foot" | "toe" | "heel" => "lower_limb",
        _ => "unknown",
    }
}

fn or_unknown(s: &str) -> String {
    let s = s.trim();
    if s.is_empty() {
        "unknown".into()
    } else {
        s.to_string()
    }
}

/// Assigns each report to the roster entry with minimal edit distance.
///
/// A match is accepted only when the distance is at most
/// `ceil(0.3 * len(canonical name))`; ties at the minimum are never resolved
/// silently.
pub fn link_injuries(rows: &[RawInjuryRow], roster: &[RosterEntry]) -> InjuryLinkage {
    let canon: Vec<(usize, String)> = roster
        .iter()
        .enumerate()
        .map(|(i, e)| (i, normalize(&e.name)))
        .collect();
    let mut out = InjuryLinkage::default();

    for row in rows {
        let query = normalize(&row.name);
        let mut scored: Vec<(usize, usize)> = canon
            .iter()
            .map(|(i, name)| (levenshtein(&query, name), *i))
            .collect();
        scored.sort();
        let Some(&(best, _)) = scored.first() else {
            out.unmatched.push(UnmatchedInjury {
                row: row.clone(),
                reason: UnmatchedReason::EmptyRoster,
                candidates: Vec::new(),
            });
            continue;
        };

        let mut tied: Vec<usize> = scored
            .iter()
            .take_while(|(d, _)| *d == best)
            .map(|(_, i)| *i)
            .collect();
        // the same player listed twice under one name is not a real tie
        tied.dedup_by_key(|i| roster[*i].id.clone());
        let candidates = |idx: &[usize]| {
            idx.iter()
                .map(|&i| (roster[i].id.clone(), roster[i].name.clone(), best))
                .collect::<Vec<_>>()
        };

        if tied.len() > 1 {
            out.unmatched.push(UnmatchedInjury {
                row: row.clone(),
                reason: UnmatchedReason::Tie,
                candidates: candidates(&tied),
            });
            continue;
        }

        let entry = &roster[tied[0]];
        let cutoff = (0.3 * canon[tied[0]].1.chars().count() as f64).ceil() as usize;
        if best > cutoff {
            out.unmatched.push(UnmatchedInjury {
                row: row.clone(),
                reason: UnmatchedReason::TooDistant,
                candidates: candidates(&tied),
            });
            continue;
        }
        out.events.push(InjuryEvent {
            player: entry.id.clone(),
            date: row.date,
            cause: or_unknown(&row.cause),
            activity: or_unknown(&row.activity),
            area: or_unknown(&row.area),
            body_region: body_region(&row.area).to_string(),
        });
    }
    out.events.sort();
    out
}

/// Reads `name,date,cause,activity,area` rows.
pub fn read_injury_reports(path: &Path) -> Result<Vec<RawInjuryRow>, IngestError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| IngestError::csv(path, e))?;
    let headers = reader.headers().map_err(|e| IngestError::csv(path, e))?.clone();
    for name in INJURY_HEADER {
        if !headers.iter().any(|h| h == name) {
            return Err(IngestError::MissingColumn {
                path: path.to_path_buf(),
                column: name.into(),
            });
        }
    }
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (ni, di, ci, ai, ri) = (col("name"), col("date"), col("cause"), col("activity"), col("area"));
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push(RawInjuryRow {
            name: record[ni].to_string(),
            date: parse_date(&record[di], path, line)?,
            cause: record[ci].to_string(),
            activity: record[ai].to_string(),
            area: record[ri].to_string(),
        });
    }
    Ok(rows)
}

pub fn write_injury_reports(path: &Path, rows: &[RawInjuryRow]) -> Result<(), IngestError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| IngestError::io(parent, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| IngestError::csv(path, e))?;
    w.write_record(INJURY_HEADER).map_err(|e| IngestError::csv(path, e))?;
    for r in rows {
        w.write_record([
            r.name.as_str(),
            &r.date.format(DATE_FORMAT).to_string(),
            &r.cause,
            &r.activity,
            &r.area,
        ])
        .map_err(|e| IngestError::csv(path, e))?;
    }
    w.flush().map_err(|e| IngestError::io(path, e))
}
