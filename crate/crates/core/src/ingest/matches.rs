//! Match statistics: `player,date,<attribute catalog...>`.

use std::fs;
use std::path::Path;

use super::{parse_date, parse_finite, IngestError, MatchStats, PlayerId, DATE_FORMAT};

/// The 38 per-match attributes used when no catalog is configured.
pub fn default_match_attributes() -> Vec<String> {
    [
        "minutes_played",
        "goals",
        "expected_goals",
        "assists",
        "expected_assists",
        "shots",
        "shots_on_target",
        "shot_assists",
        "key_passes",
        "passes",
        "accurate_passes",
        "long_passes",
        "accurate_long_passes",
        "crosses",
        "accurate_crosses",
        "dribbles",
        "successful_dribbles",
        "duels",
        "duels_won",
        "aerial_duels",
        "aerial_duels_won",
        "challenges",
        "challenges_won",
        "tackles",
        "successful_tackles",
        "interceptions",
        "clearances",
        "recoveries",
        "recoveries_opp_half",
        "losses",
        "losses_own_half",
        "progressive_runs",
        "touches_in_box",
        "offsides",
        "fouls",
        "fouls_suffered",
        "yellow_cards",
        "red_cards",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Reads match stats whose header must be exactly `player,date` followed by
/// `attributes` in order. Values must be finite and non-negative.
pub fn read_match_stats(path: &Path, attributes: &[String]) -> Result<Vec<MatchStats>, IngestError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| IngestError::csv(path, e))?;
    let headers = reader.headers().map_err(|e| IngestError::csv(path, e))?.clone();
    let expected: Vec<&str> = ["player", "date"]
        .into_iter()
        .chain(attributes.iter().map(String::as_str))
        .collect();
    for (position, want) in expected.iter().enumerate() {
        match headers.get(position) {
            Some(h) if h == *want => {}
            Some(found) => {
                return Err(IngestError::UnexpectedColumn {
                    path: path.to_path_buf(),
                    position,
                    expected: want.to_string(),
                    found: found.to_string(),
                })
            }
            None => {
                return Err(IngestError::MissingColumn {
                    path: path.to_path_buf(),
                    column: want.to_string(),
                })
            }
        }
    }
    if let Some(extra) = headers.get(expected.len()) {
        return Err(IngestError::UnexpectedColumn {
            path: path.to_path_buf(),
            position: expected.len(),
            expected: String::new(),
            found: extra.to_string(),
        });
    }

    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let player = PlayerId::new(&record[0])?;
        let date = parse_date(&record[1], path, line)?;
        if !seen.insert((player.clone(), date)) {
            return Err(IngestError::Duplicate {
                player,
                date,
                feature: "match".into(),
            });
        }
        let values = attributes
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let raw = &record[i + 2];
                parse_finite(raw)
                    .filter(|v| *v >= 0.0)
                    .ok_or_else(|| IngestError::InvalidValue {
                        path: path.to_path_buf(),
                        line,
                        field: name.clone(),
                        value: raw.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(MatchStats { player, date, values });
    }
    Ok(out)
}

pub fn write_match_stats(path: &Path, attributes: &[String], stats: &[MatchStats]) -> Result<(), IngestError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| IngestError::io(parent, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| IngestError::csv(path, e))?;
    let mut header = vec!["player".to_string(), "date".to_string()];
    header.extend(attributes.iter().cloned());
    w.write_record(&header).map_err(|e| IngestError::csv(path, e))?;
    for s in stats {
        let mut rec = vec![s.player.to_string(), s.date.format(DATE_FORMAT).to_string()];
        rec.extend(s.values.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| IngestError::csv(path, e))?;
    }
    w.flush().map_err(|e| IngestError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_catalog_has_38_unique_attributes() {
        let attrs = default_match_attributes();
        assert_eq!(attrs.len(), 38);
        let unique: std::collections::BTreeSet<_> = attrs.iter().collect();
        assert_eq!(unique.len(), 38);
    }

    #[test]
    fn header_must_match_catalog() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("m.csv");
        let attrs = vec!["goals".to_string(), "fouls".to_string()];
        fs::write(&path, "player,date,fouls,goals\np1,2021-05-01,1,0\n").unwrap();
        assert!(matches!(
            read_match_stats(&path, &attrs),
            Err(IngestError::UnexpectedColumn { position: 2, .. })
        ));
        fs::write(&path, "player,date,goals,fouls\np1,2021-05-01,1,-2\n").unwrap();
        assert!(matches!(
            read_match_stats(&path, &attrs),
            Err(IngestError::InvalidValue { .. })
        ));
        fs::write(&path, "player,date,goals,fouls\np1,2021-05-01,1,2\n").unwrap();
        let stats = read_match_stats(&path, &attrs).unwrap();
        assert_eq!(stats[0].values, vec![1.0, 2.0]);
    }
}
