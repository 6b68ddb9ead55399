use std::fs;
use std::path::Path;

use chrono::NaiveDate;

use super::{Provenance, WindowError, WindowSample, WindowSet};
use crate::ingest::{PlayerId, DATE_FORMAT};

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> WindowError + '_ {
    move |source| WindowError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Placeholder key for rows read without `player,anchor_date` columns.
pub(crate) fn unkeyed() -> (PlayerId, NaiveDate) {
    (
        PlayerId::new("unknown").expect("non-empty"),
        NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date"),
    )
}

/// Header: `[player,anchor_date,]<feature names>,label,provenance`.
pub fn write_samples(path: &Path, set: &WindowSet, with_keys: bool) -> Result<(), WindowError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| WindowError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header: Vec<&str> = Vec::new();
    if with_keys {
        header.extend(["player", "anchor_date"]);
    }
    header.extend(set.feature_names.iter().map(String::as_str));
    header.extend(["label", "provenance"]);
    w.write_record(&header).map_err(csv_err(path))?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for s in &set.samples {
        row.clear();
        if with_keys {
            row.push(s.player.to_string());
            row.push(s.anchor_date.format(DATE_FORMAT).to_string());
        }
        row.extend(s.x.iter().map(|v| v.to_string()));
        row.push(s.label.to_string());
        row.push(s.provenance.as_str().to_string());
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| WindowError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a file written by [`write_samples`]; the number of steps is the
/// largest `_<k>` suffix among the feature names.
pub fn read_samples(path: &Path) -> Result<WindowSet, WindowError> {
    let format = |message: String| WindowError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = reader.headers().map_err(csv_err(path))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 2 || cols[cols.len() - 2..] != ["label", "provenance"] {
        return Err(format("header must end with label,provenance".into()));
    }
    let with_keys = cols.first() == Some(&"player");
    let first = if with_keys { 2 } else { 0 };
    let names: Vec<String> = cols[first..cols.len() - 2].iter().map(|s| s.to_string()).collect();
    let n_steps = names
        .iter()
        .map(|n| {
            n.rsplit_once('_')
                .and_then(|(_, k)| k.parse::<usize>().ok())
                .ok_or_else(|| format(format!("column {n:?} lacks a _<position> suffix")))
        })
        .try_fold(0, |acc, k| k.map(|k| acc.max(k)))?;
    if n_steps > 0 && !names.len().is_multiple_of(n_steps) {
        return Err(format(format!("{} columns do not divide into {n_steps} steps", names.len())));
    }

    let mut samples = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err(path))?;
        let line = rec.position().map_or(0, |p| p.line());
        let (player, anchor_date) = if with_keys {
            let player = PlayerId::new(&rec[0]).map_err(|_| format(format!("line {line}: empty player")))?;
            let date = NaiveDate::parse_from_str(&rec[1], DATE_FORMAT)
                .map_err(|_| format(format!("line {line}: bad anchor_date {:?}", &rec[1])))?;
            (player, date)
        } else {
            unkeyed()
        };
        let x = (first..first + names.len())
            .map(|i| {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| format(format!("line {line}: bad number {:?} in {}", &rec[i], cols[i])))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let n = rec.len();
        let label = match &rec[n - 2] {
            "0" => 0,
            "1" => 1,
            other => return Err(format(format!("line {line}: bad label {other:?}"))),
        };
        let provenance = match &rec[n - 1] {
            "real" => Provenance::Real,
            "synthetic" => Provenance::Synthetic,
            other => return Err(format(format!("line {line}: bad provenance {other:?}"))),
        };
        samples.push(WindowSample {
            player,
            anchor_date,
            x,
            label,
            provenance,
        });
    }
    Ok(WindowSet {
        feature_names: names,
        n_steps,
        samples,
    })
}
