//! CSV persistence of the feature store and its off-session injury table.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use super::{DailyRecord, FeatureCatalog, FeatureKind, FeatureStore, SessionType, StoreError, Value, UNKNOWN};
use crate::ingest::{InjuryEvent, PlayerId, DATE_FORMAT};

pub const OFF_SESSION_FILE: &str = "off_session_injuries.csv";
const INJURY_EVENT_HEADER: [&str; 6] = ["player", "date", "cause", "activity", "area", "body_region"];

fn side_table(path: &Path) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(OFF_SESSION_FILE)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> StoreError + '_ {
    move |source| StoreError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the store CSV at `path` and the side table next to it. Absent
/// numeric cells are empty; floats use shortest round-trip formatting.
pub fn write_store(store: &FeatureStore, path: &Path) -> Result<(), StoreError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| StoreError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(store.catalog.columns()).map_err(csv_err(path))?;
    let mut row = Vec::with_capacity(store.catalog.len() + 4);
    for r in &store.records {
        row.clear();
        row.push(r.player.to_string());
        row.push(r.date.format(DATE_FORMAT).to_string());
        row.push(r.session_type.as_str().to_string());
        for v in &r.values {
            row.push(match v {
                Value::Number(Some(x)) => x.to_string(),
                Value::Number(None) => String::new(),
                Value::Category(s) => s.clone(),
            });
        }
        row.push(if r.injury { "1" } else { "0" }.to_string());
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;

    let side = side_table(path);
    let mut w = csv::Writer::from_path(&side).map_err(csv_err(&side))?;
    w.write_record(INJURY_EVENT_HEADER).map_err(csv_err(&side))?;
    for e in &store.off_session_injuries {
        w.write_record([
            e.player.as_str(),
            &e.date.format(DATE_FORMAT).to_string(),
            &e.cause,
            &e.activity,
            &e.area,
            &e.body_region,
        ])
        .map_err(csv_err(&side))?;
    }
    w.flush().map_err(|source| StoreError::Io { path: side, source })
}

fn check_header(path: &Path, found: &csv::StringRecord, expected: &[String]) -> Result<(), StoreError> {
    let n = found.len().max(expected.len());
    for position in 0..n {
        let (e, f) = (expected.get(position), found.get(position));
        if e.map(String::as_str) != f {
            return Err(StoreError::SchemaMismatch {
                path: path.to_path_buf(),
                position,
                expected: e.cloned().unwrap_or_default(),
                found: f.unwrap_or_default().to_string(),
            });
        }
    }
    Ok(())
}

/// Reads a store written by [`write_store`], validating the header against
/// `catalog` column by column.
pub fn read_store(path: &Path, catalog: &FeatureCatalog) -> Result<FeatureStore, StoreError> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = reader.headers().map_err(csv_err(path))?.clone();
    let columns = catalog.columns();
    check_header(path, &header, &columns)?;

    let mut records = Vec::new();
    let mut keys = BTreeSet::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err(path))?;
        let line = rec.position().map_or(0, |p| p.line());
        let invalid = |col: usize| StoreError::InvalidCell {
            path: path.to_path_buf(),
            line,
            column: columns[col].clone(),
            value: rec[col].to_string(),
        };
        let player = PlayerId::new(&rec[0]).map_err(|_| invalid(0))?;
        let date = chrono::NaiveDate::parse_from_str(&rec[1], DATE_FORMAT).map_err(|_| invalid(1))?;
        let session_type = SessionType::parse(&rec[2]).ok_or_else(|| invalid(2))?;
        let values = catalog
            .features()
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let cell = &rec[i + 3];
                match f.kind {
                    FeatureKind::Numeric if cell.is_empty() => Ok(Value::Number(None)),
                    FeatureKind::Numeric => cell
                        .parse::<f64>()
                        .map(|v| Value::Number(Some(v)))
                        .map_err(|_| invalid(i + 3)),
                    FeatureKind::Categorical if cell.is_empty() => Ok(Value::Category(UNKNOWN.into())),
                    FeatureKind::Categorical => Ok(Value::Category(cell.to_string())),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let last = columns.len() - 1;
        let injury = match &rec[last] {
            "0" => false,
            "1" => true,
            _ => return Err(invalid(last)),
        };
        if !keys.insert((player.clone(), date)) {
            return Err(StoreError::DuplicateKey { player, date });
        }
        records.push(DailyRecord {
            player,
            date,
            session_type,
            values,
            injury,
        });
    }
    records.sort_by(|a, b| (&a.player, a.date).cmp(&(&b.player, b.date)));

    let side = side_table(path);
    let mut off_session_injuries = Vec::new();
    if side.exists() {
        let mut reader = csv::Reader::from_path(&side).map_err(csv_err(&side))?;
        let header = reader.headers().map_err(csv_err(&side))?.clone();
        let expected: Vec<String> = INJURY_EVENT_HEADER.iter().map(|s| s.to_string()).collect();
        check_header(&side, &header, &expected)?;
        for rec in reader.records() {
            let rec = rec.map_err(csv_err(&side))?;
            let line = rec.position().map_or(0, |p| p.line());
            let date = chrono::NaiveDate::parse_from_str(&rec[1], DATE_FORMAT).map_err(|_| {
                StoreError::InvalidCell {
                    path: side.clone(),
                    line,
                    column: "date".into(),
                    value: rec[1].to_string(),
                }
            })?;
            off_session_injuries.push(InjuryEvent {
                player: PlayerId::new(&rec[0])?,
                date,
                cause: rec[2].to_string(),
                activity: rec[3].to_string(),
                area: rec[4].to_string(),
                body_region: rec[5].to_string(),
            });
        }
        off_session_injuries.sort();
    }

    Ok(FeatureStore {
        catalog: catalog.clone(),
        records,
        off_session_injuries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{FeatureDef, FeatureGroup};
    use chrono::NaiveDate;

    fn fixture(n: usize) -> FeatureStore {
        let catalog = FeatureCatalog::standard(&["goals".to_string()]).unwrap();
        let records = (0..n)
            .map(|i| DailyRecord {
                player: PlayerId::new(format!("p{}", i % 5)).unwrap(),
                date: NaiveDate::from_ymd_opt(2021, 3, 1).unwrap() + chrono::Duration::days((i / 5) as i64),
                session_type: if i % 7 == 0 { SessionType::Match } else { SessionType::Training },
                values: catalog
                    .features()
                    .iter()
                    .enumerate()
                    .map(|(k, f)| match f.kind {
                        FeatureKind::Numeric if (i + k) % 4 == 0 => Value::Number(None),
                        FeatureKind::Numeric => Value::Number(Some((i * k) as f64 / 7.0 - 0.1)),
                        FeatureKind::Categorical => Value::Category(if i % 9 == 0 { "knee".into() } else { UNKNOWN.into() }),
                    })
                    .collect(),
                injury: i % 9 == 0,
            })
            .collect::<Vec<_>>();
        let mut store = FeatureStore {
            catalog,
            records,
            off_session_injuries: vec![InjuryEvent {
                player: PlayerId::new("p1").unwrap(),
                date: NaiveDate::from_ymd_opt(2021, 6, 1).unwrap(),
                cause: "overuse".into(),
                activity: "rest".into(),
                area: "calf".into(),
                body_region: "lower_limb".into(),
            }],
        };
        store.records.sort_by(|a, b| (&a.player, a.date).cmp(&(&b.player, b.date)));
        store
    }

    #[test]
    fn round_trip_50_records() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("store.csv");
        let store = fixture(50);
        write_store(&store, &path).unwrap();
        assert_eq!(read_store(&path, &store.catalog).unwrap(), store);
    }

    #[test]
    fn reordered_columns_name_the_column() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("store.csv");
        let store = fixture(3);
        write_store(&store, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let (header, body) = text.split_once('\n').unwrap();
        let swapped = header.replacen("rpe,duration_min", "duration_min,rpe", 1);
        fs::write(&path, format!("{swapped}\n{body}")).unwrap();
        match read_store(&path, &store.catalog) {
            Err(StoreError::SchemaMismatch { expected, found, position, .. }) => {
                assert_eq!((expected.as_str(), found.as_str(), position), ("rpe", "duration_min", 3));
            }
            other => panic!("expected schema mismatch, got {other:?}"),
        }
    }

    #[test]
    fn catalog_of_114_columns_validates() {
        // the paper's full attribute count: keys, target and 110 features
        let mut defs: Vec<FeatureDef> = FeatureCatalog::standard(&crate::ingest::default_match_attributes())
            .unwrap()
            .features()
            .to_vec();
        let mut extra = 0;
        while defs.len() + 4 < 114 {
            defs.push(FeatureDef {
                name: format!("gps_metric_{extra}"),
                group: FeatureGroup::GPS,
                kind: FeatureKind::Numeric,
            });
            extra += 1;
        }
        let catalog = FeatureCatalog::new(defs).unwrap();
        assert_eq!(catalog.columns().len(), 114);
        let store = FeatureStore {
            catalog: catalog.clone(),
            records: vec![DailyRecord {
                player: PlayerId::new("p1").unwrap(),
                date: NaiveDate::from_ymd_opt(2021, 3, 1).unwrap(),
                session_type: SessionType::Training,
                values: catalog
                    .features()
                    .iter()
                    .map(|f| match f.kind {
                        FeatureKind::Numeric => Value::Number(Some(1.5)),
                        FeatureKind::Categorical => Value::Category(UNKNOWN.into()),
                    })
                    .collect(),
                injury: false,
            }],
            off_session_injuries: Vec::new(),
        };
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("store.csv");
        write_store(&store, &path).unwrap();
        assert_eq!(read_store(&path, &catalog).unwrap(), store);
    }
}
