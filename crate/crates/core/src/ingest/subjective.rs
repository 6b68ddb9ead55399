//! Per-feature subjective CSVs: first column `date`, one column per player.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{parse_date, parse_finite, IngestError, PlayerId, SubjectiveReport, DATE_FORMAT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectiveField {
    Rpe,
    DurationMin,
    Fatigue,
    Mood,
    Readiness,
    Soreness,
    Stress,
    SleepDurationH,
    SleepQuality,
}

impl SubjectiveField {
    pub const ALL: [SubjectiveField; 9] = [
        SubjectiveField::Rpe,
        SubjectiveField::DurationMin,
        SubjectiveField::Fatigue,
        SubjectiveField::Mood,
        SubjectiveField::Readiness,
        SubjectiveField::Soreness,
        SubjectiveField::Stress,
        SubjectiveField::SleepDurationH,
        SubjectiveField::SleepQuality,
    ];

    pub fn name(self) -> &'static str {
        use SubjectiveField::*;
        match self {
            Rpe => "rpe",
            DurationMin => "duration_min",
            Fatigue => "fatigue",
            Mood => "mood",
            Readiness => "readiness",
            Soreness => "soreness",
            Stress => "stress",
            SleepDurationH => "sleep_duration_h",
            SleepQuality => "sleep_quality",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|f| f.name() == name)
    }

    /// Validates a raw value and stores it on the report.
    fn assign(self, report: &mut SubjectiveReport, value: f64) -> Result<(), String> {
        use SubjectiveField::*;
        let ordinal = |lo: f64, hi: f64| -> Result<u8, String> {
            if value.fract() == 0.0 && (lo..=hi).contains(&value) {
                Ok(value as u8)
            } else {
                Err(format!("expected integer in [{lo}, {hi}]"))
            }
        };
        let non_negative = || -> Result<f64, String> {
            if value >= 0.0 {
                Ok(value)
            } else {
                Err("expected value >= 0".into())
            }
        };
        match self {
            Rpe => report.rpe = Some(ordinal(0.0, 10.0)?),
            DurationMin => report.duration_min = Some(non_negative()?),
            Fatigue => report.fatigue = Some(ordinal(1.0, 5.0)?),
            Mood => report.mood = Some(ordinal(1.0, 5.0)?),
            Readiness => report.readiness = Some(ordinal(1.0, 5.0)?),
            Soreness => report.soreness = Some(ordinal(1.0, 5.0)?),
            Stress => report.stress = Some(ordinal(1.0, 5.0)?),
            SleepDurationH => report.sleep_duration_h = Some(non_negative()?),
            SleepQuality => report.sleep_quality = Some(ordinal(1.0, 5.0)?),
        }
        Ok(())
    }
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| IngestError::io(dir, e))? {
        let path = entry.map_err(|e| IngestError::io(dir, e))?.path();
        if path.extension().is_some_and(|ext| ext == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Reads every `<feature>.csv` in `dir` and pivots them into one report per
/// (player, date). Empty cells stay absent.
pub fn read_subjective(dir: &Path) -> Result<Vec<SubjectiveReport>, IngestError> {
    let mut reports: BTreeMap<(PlayerId, NaiveDate), SubjectiveReport> = BTreeMap::new();

    for path in csv_files(dir)? {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        let field = SubjectiveField::from_name(stem).ok_or(IngestError::BadFileName {
            path: path.clone(),
            pattern: "<subjective feature>.csv",
        })?;

        let mut reader = csv::Reader::from_path(&path).map_err(|e| IngestError::csv(&path, e))?;
        let headers = reader
            .headers()
            .map_err(|e| IngestError::csv(&path, e))?
            .clone();
        if headers.get(0) != Some("date") {
            return Err(IngestError::MissingColumn {
                path,
                column: "date".into(),
            });
        }
        let players = headers
            .iter()
            .skip(1)
            .map(PlayerId::new)
            .collect::<Result<Vec<_>, _>>()?;

        let mut seen_dates = BTreeSet::new();
        for record in reader.records() {
            let record = record.map_err(|e| IngestError::csv(&path, e))?;
            let line = record.position().map_or(0, |p| p.line());
            let date = parse_date(&record[0], &path, line)?;
            if !seen_dates.insert(date) {
                // A repeated date row duplicates every player's cell for this feature.
                if let Some((player, _)) = players
                    .iter()
                    .zip(record.iter().skip(1))
                    .find(|(_, cell)| !cell.trim().is_empty())
                {
                    return Err(IngestError::Duplicate {
                        player: player.clone(),
                        date,
                        feature: field.name().into(),
                    });
                }
                continue;
            }
            for (player, cell) in players.iter().zip(record.iter().skip(1)) {
                if cell.trim().is_empty() {
                    continue;
                }
                let invalid = |reason: String| IngestError::InvalidValue {
                    path: path.clone(),
                    line,
                    field: format!("{} ({reason})", field.name()),
                    value: cell.to_string(),
                };
                let value = parse_finite(cell).ok_or_else(|| invalid("not a number".into()))?;
                let report = reports
                    .entry((player.clone(), date))
                    .or_insert_with(|| SubjectiveReport::new(player.clone(), date));
                field.assign(report, value).map_err(invalid)?;
            }
        }
    }

    Ok(reports.into_values().collect())
}

/// Writes one CSV per subjective feature, players as columns in sorted order.
pub fn write_subjective(reports: &[SubjectiveReport], dir: &Path) -> Result<(), IngestError> {
    fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
    let players: BTreeSet<&PlayerId> = reports.iter().map(|r| &r.player).collect();
    let mut by_date: BTreeMap<NaiveDate, BTreeMap<&PlayerId, &SubjectiveReport>> = BTreeMap::new();
    for r in reports {
        if by_date
            .entry(r.date)
            .or_default()
            .insert(&r.player, r)
            .is_some()
        {
            return Err(IngestError::Duplicate {
                player: r.player.clone(),
                date: r.date,
                feature: "report".into(),
            });
        }
    }

    for field in SubjectiveField::ALL {
        let path = dir.join(format!("{}.csv", field.name()));
        let mut writer = csv::Writer::from_path(&path).map_err(|e| IngestError::csv(&path, e))?;
        let mut header = vec!["date".to_string()];
        header.extend(players.iter().map(|p| p.to_string()));
        writer
            .write_record(&header)
            .map_err(|e| IngestError::csv(&path, e))?;
        for (date, row) in &by_date {
            let mut record = vec![date.format(DATE_FORMAT).to_string()];
            for p in &players {
                let cell = row
                    .get(p)
                    .and_then(|r| r.get(field))
                    .map(|v| v.to_string())
                    .unwrap_or_default();
                record.push(cell);
            }
            writer
                .write_record(&record)
                .map_err(|e| IngestError::csv(&path, e))?;
        }
        writer.flush().map_err(|e| IngestError::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, DATE_FORMAT).unwrap()
    }

    #[test]
    fn single_cell_pivot() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "rpe.csv", "date,p1\n2021-05-01,7\n");
        let reports = read_subjective(tmp.path()).unwrap();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].player.as_str(), "p1");
        assert_eq!(reports[0].rpe, Some(7));
    }

    #[test]
    fn empty_cell_stays_absent() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "rpe.csv", "date,p1,p2\n2021-05-01,7,\n");
        let reports = read_subjective(tmp.path()).unwrap();
        assert_eq!(reports.len(), 1, "p2 has no value anywhere so no report");
        assert!(reports.iter().all(|r| r.player.as_str() != "p2"));

        write(tmp.path(), "fatigue.csv", "date,p1,p2\n2021-05-01,3,2\n");
        let reports = read_subjective(tmp.path()).unwrap();
        let p2 = reports.iter().find(|r| r.player.as_str() == "p2").unwrap();
        assert_eq!(p2.rpe, None);
        assert_eq!(p2.fatigue, Some(2));
    }

    #[test]
    fn merges_files_like_a_row_join() {
        let tmp = tempfile::tempdir().unwrap();
        let rpe = [
            ("2021-05-01", "7", "5"),
            ("2021-05-02", "", "6"),
            ("2021-05-03", "8", ""),
            ("2021-05-04", "3", "4"),
            ("2021-05-05", "", ""),
        ];
        let fatigue = [
            ("2021-05-01", "3", ""),
            ("2021-05-02", "2", "4"),
            ("2021-05-03", "", "1"),
            ("2021-05-04", "5", "5"),
            ("2021-05-05", "1", ""),
        ];
        let body = |rows: &[(&str, &str, &str)]| {
            let mut s = String::from("date,p1,p2\n");
            for (a, b, c) in rows {
                s.push_str(&format!("{a},{b},{c}\n"));
            }
            s
        };
        write(tmp.path(), "rpe.csv", &body(&rpe));
        write(tmp.path(), "fatigue.csv", &body(&fatigue));
        let reports = read_subjective(tmp.path()).unwrap();

        // naive join: every (date, player) with any non-empty cell across both tables
        let mut expected = Vec::new();
        for (r, f) in rpe.iter().zip(fatigue.iter()) {
            for (player, rv, fv) in [("p1", r.1, f.1), ("p2", r.2, f.2)] {
                if !rv.is_empty() || !fv.is_empty() {
                    expected.push((
                        player.to_string(),
                        d(r.0),
                        rv.parse::<u8>().ok(),
                        fv.parse::<u8>().ok(),
                    ));
                }
            }
        }
        expected.sort();
        let mut got: Vec<_> = reports
            .iter()
            .map(|r| (r.player.to_string(), r.date, r.rpe, r.fatigue))
            .collect();
        got.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn malformed_date_reports_line() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "rpe.csv", "date,p1\n2021-05-01,7\n01/05/2021,6\n");
        let err = read_subjective(tmp.path()).unwrap_err();
        match err {
            IngestError::MalformedDate { line, value, .. } => {
                assert_eq!(line, 3);
                assert_eq!(value, "01/05/2021");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_date_row_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "rpe.csv", "date,p1\n2021-05-01,7\n2021-05-01,6\n");
        assert!(matches!(
            read_subjective(tmp.path()),
            Err(IngestError::Duplicate { .. })
        ));
    }

    #[test]
    fn out_of_range_rpe_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "rpe.csv", "date,p1\n2021-05-01,11\n");
        assert!(matches!(
            read_subjective(tmp.path()),
            Err(IngestError::InvalidValue { .. })
        ));
    }

    #[test]
    fn write_then_read_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        let p = |s: &str| PlayerId::new(s).unwrap();
        let mut a = SubjectiveReport::new(p("p1"), d("2021-05-01"));
        a.rpe = Some(6);
        a.duration_min = Some(72.5);
        a.sleep_duration_h = Some(7.25);
        let mut b = SubjectiveReport::new(p("p2"), d("2021-05-03"));
        b.mood = Some(4);
        b.sleep_quality = Some(2);
        let reports = vec![a, b];
        write_subjective(&reports, tmp.path()).unwrap();
        assert_eq!(read_subjective(tmp.path()).unwrap(), reports);
    }
}
