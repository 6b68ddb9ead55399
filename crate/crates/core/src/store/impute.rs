use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FeatureKind, FeatureStore, StoreError, Value, UNKNOWN};
use crate::ingest::PlayerId;

/// Rounds of the iterative imputer; fixed, no convergence test.
pub const ITERATIVE_ROUNDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeMethod {
    Median,
    Linear,
    Iterative,
}

impl FromStr for ImputeMethod {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, StoreError> {
        match s {
            "median" => Ok(ImputeMethod::Median),
            "linear" => Ok(ImputeMethod::Linear),
            "iterative" => Ok(ImputeMethod::Iterative),
            other => Err(StoreError::UnknownImputation(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputeReport {
    pub filled: usize,
    /// (player, feature) pairs with no present value, filled from the
    /// all-player median (or 0 when no player has a value).
    pub global_fallbacks: Vec<(PlayerId, String)>,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Fills a single column. Returns false when the column had no present value
/// and the fallback was used.
fn fill_column(column: &mut [Option<f64>], method: ImputeMethod, fallback: f64) -> bool {
    let present: Vec<usize> = (0..column.len()).filter(|i| column[*i].is_some()).collect();
    if present.is_empty() {
        column.iter_mut().for_each(|c| *c = Some(fallback));
        return false;
    }
    match method {
        ImputeMethod::Median | ImputeMethod::Iterative => {
            let mut vals: Vec<f64> = present.iter().map(|i| column[*i].unwrap()).collect();
            let m = median(&mut vals).unwrap();
            column.iter_mut().filter(|c| c.is_none()).for_each(|c| *c = Some(m));
        }
        ImputeMethod::Linear => {
            for i in 0..column.len() {
                if column[i].is_some() {
                    continue;
                }
                let after = present.partition_point(|&p| p < i);
                let prev = after.checked_sub(1).map(|k| present[k]);
                let next = present.get(after).copied();
                column[i] = Some(match (prev, next) {
                    (Some(a), Some(b)) => {
                        let (va, vb) = (column[a].unwrap(), column[b].unwrap());
                        va + (vb - va) * (i - a) as f64 / (b - a) as f64
                    }
                    (Some(a), None) => column[a].unwrap(),
                    (None, Some(b)) => column[b].unwrap(),
                    (None, None) => unreachable!("column has a present value"),
                });
            }
        }
    }
    true
}

/// Least-squares refinement of originally-missing cells, one column at a
/// time, regressing on every other column plus an intercept.
fn refine_iteratively(matrix: &mut [Vec<f64>], missing: &[Vec<bool>]) {
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, Vec::len);
    if rows < 2 || cols < 2 {
        return;
    }
    for _ in 0..ITERATIVE_ROUNDS {
        for j in 0..cols {
            let train: Vec<usize> = (0..rows).filter(|r| !missing[*r][j]).collect();
            let predict: Vec<usize> = (0..rows).filter(|r| missing[*r][j]).collect();
            if train.is_empty() || predict.is_empty() {
                continue;
            }
            let design = |r: usize, c: usize| -> f64 {
                if c == 0 {
                    1.0
                } else {
                    let k = if c - 1 < j { c - 1 } else { c };
                    matrix[r][k]
                }
            };
            let a = DMatrix::from_fn(train.len(), cols, |i, c| design(train[i], c));
            let b = DVector::from_iterator(train.len(), train.iter().map(|&r| matrix[r][j]));
            let Ok(coef) = a.svd(true, true).solve(&b, 1e-10) else {
                continue;
            };
            let predicted: Vec<(usize, f64)> = predict
                .iter()
                .map(|&r| (r, (0..cols).map(|c| design(r, c) * coef[c]).sum::<f64>()))
                .collect();
            for (r, v) in predicted {
                if v.is_finite() {
                    matrix[r][j] = v;
                }
            }
        }
    }
}

/// Fills every absent numeric cell per player; categorical gaps become
/// `"unknown"`. Present values are never modified.
pub fn impute(store: &FeatureStore, method: ImputeMethod) -> (FeatureStore, ImputeReport) {
    let numeric: Vec<usize> = store
        .catalog
        .features()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.kind == FeatureKind::Numeric)
        .map(|(i, _)| i)
        .collect();

    let global: Vec<Option<f64>> = numeric
        .iter()
        .map(|&f| {
            let mut vals: Vec<f64> = store.records.iter().filter_map(|r| r.values[f].number()).collect();
            median(&mut vals)
        })
        .collect();

    // contiguous per-player ranges (records are sorted by player)
    let mut ranges = Vec::new();
    let mut start = 0;
    for i in 1..=store.records.len() {
        if i == store.records.len() || store.records[i].player != store.records[start].player {
            if i > start {
                ranges.push(start..i);
            }
            start = i;
        }
    }

    let filled: Vec<(Vec<Vec<f64>>, Vec<String>)> = ranges
        .par_iter()
        .map(|range| {
            let recs = &store.records[range.clone()];
            let mut fallbacks = Vec::new();
            let mut columns: Vec<Vec<Option<f64>>> = numeric
                .iter()
                .map(|&f| recs.iter().map(|r| r.values[f].number()).collect())
                .collect();
            let missing: Vec<Vec<bool>> = (0..recs.len())
                .map(|r| columns.iter().map(|c| c[r].is_none()).collect())
                .collect();
            for (k, column) in columns.iter_mut().enumerate() {
                if !fill_column(column, method, global[k].unwrap_or(0.0)) {
                    fallbacks.push(store.catalog.features()[numeric[k]].name.clone());
                }
            }
            let mut matrix: Vec<Vec<f64>> = (0..recs.len())
                .map(|r| columns.iter().map(|c| c[r].unwrap()).collect())
                .collect();
            if method == ImputeMethod::Iterative {
                // columns with no present value keep their fallback
                let mut regress_mask = missing.clone();
                for (k, column_missing_everywhere) in (0..numeric.len())
                    .map(|k| (k, missing.iter().all(|row| row[k])))
                {
                    if column_missing_everywhere {
                        regress_mask.iter_mut().for_each(|row| row[k] = false);
                    }
                }
                refine_iteratively(&mut matrix, &regress_mask);
            }
            (matrix, fallbacks)
        })
        .collect();

    let mut out = store.clone();
    let mut report = ImputeReport::default();
    for (range, (matrix, fallbacks)) in ranges.iter().zip(filled) {
        let player = store.records[range.start].player.clone();
        report
            .global_fallbacks
            .extend(fallbacks.into_iter().map(|f| (player.clone(), f)));
        for (row, rec) in matrix.iter().zip(&mut out.records[range.clone()]) {
            for (k, &f) in numeric.iter().enumerate() {
                if rec.values[f].number().is_none() {
                    rec.values[f] = Value::Number(Some(row[k]));
                    report.filled += 1;
                }
            }
            for v in rec.values.iter_mut() {
                if let Value::Category(s) = v {
                    if s.trim().is_empty() {
                        *s = UNKNOWN.to_string();
                    }
                }
            }
        }
    }
    (out, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{DailyRecord, FeatureCatalog, FeatureDef, FeatureGroup, SessionType};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn store(columns: &[&[Option<f64>]], players: &[&str]) -> FeatureStore {
        let defs = (0..columns.len())
            .map(|i| FeatureDef {
                name: format!("f{i}"),
                group: FeatureGroup::TL,
                kind: FeatureKind::Numeric,
            })
            .chain(std::iter::once(FeatureDef {
                name: "injury_area".into(),
                group: FeatureGroup::INJURY,
                kind: FeatureKind::Categorical,
            }))
            .collect();
        let catalog = FeatureCatalog::new(defs).unwrap();
        let n = columns[0].len();
        let records = (0..n)
            .map(|r| DailyRecord {
                player: PlayerId::new(players[r]).unwrap(),
                date: NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + chrono::Duration::days(r as i64),
                session_type: SessionType::Training,
                values: columns
                    .iter()
                    .map(|c| Value::Number(c[r]))
                    .chain(std::iter::once(Value::Category(String::new())))
                    .collect(),
                injury: false,
            })
            .collect();
        FeatureStore {
            catalog,
            records,
            off_session_injuries: Vec::new(),
        }
    }

    fn column(s: &FeatureStore, k: usize) -> Vec<f64> {
        s.records.iter().map(|r| r.values[k].number().unwrap()).collect()
    }

    #[test]
    fn linear_midpoint() {
        let s = store(&[&[Some(1.0), None, Some(3.0)]], &["p", "p", "p"]);
        let (out, report) = impute(&s, ImputeMethod::Linear);
        assert_eq!(column(&out, 0), vec![1.0, 2.0, 3.0]);
        assert_eq!(report.filled, 1);
    }

    #[test]
    fn linear_boundaries_use_nearest() {
        let s = store(&[&[None, Some(4.0), None, Some(8.0), None]], &["p"; 5]);
        let (out, _) = impute(&s, ImputeMethod::Linear);
        assert_eq!(column(&out, 0), vec![4.0, 4.0, 6.0, 8.0, 8.0]);
    }

    #[test]
    fn median_of_present_values() {
        let s = store(&[&[None, Some(5.0), Some(7.0)]], &["p", "p", "p"]);
        let (out, _) = impute(&s, ImputeMethod::Median);
        assert_eq!(column(&out, 0), vec![6.0, 5.0, 7.0]);
    }

    #[test]
    fn categorical_gap_becomes_unknown() {
        let s = store(&[&[Some(1.0)]], &["p"]);
        let (out, _) = impute(&s, ImputeMethod::Median);
        assert_eq!(out.records[0].values[1], Value::Category("unknown".into()));
    }

    #[test]
    fn fully_missing_player_feature_uses_global_median() {
        let s = store(
            &[&[Some(1.0), Some(3.0), Some(10.0), None, None]],
            &["a", "a", "a", "b", "b"],
        );
        let (out, report) = impute(&s, ImputeMethod::Median);
        assert_eq!(column(&out, 0)[3..], [3.0, 3.0]);
        assert_eq!(report.global_fallbacks, vec![(PlayerId::new("b").unwrap(), "f0".to_string())]);
    }

    #[test]
    fn unknown_method_is_error() {
        assert!(matches!("mean".parse::<ImputeMethod>(), Err(StoreError::UnknownImputation(_))));
        assert_eq!("iterative".parse::<ImputeMethod>().unwrap(), ImputeMethod::Iterative);
    }

    #[test]
    fn iterative_recovers_linear_relation() {
        // f1 = 2 * f0 + 1 exactly; the missing f1 cell should be found by regression
        let f0: Vec<Option<f64>> = (0..12).map(|i| Some(i as f64)).collect();
        let mut f1: Vec<Option<f64>> = (0..12).map(|i| Some(2.0 * i as f64 + 1.0)).collect();
        f1[10] = None;
        let s = store(&[&f0, &f1], &["p"; 12]);
        let (median_fill, _) = impute(&s, ImputeMethod::Median);
        let (iter_fill, _) = impute(&s, ImputeMethod::Iterative);
        assert!((column(&iter_fill, 1)[10] - 21.0).abs() < 1e-6);
        assert!((column(&median_fill, 1)[10] - 21.0).abs() > 1.0);
    }

    fn arb_store() -> impl Strategy<Value = FeatureStore> {
        let col = proptest::collection::vec(proptest::option::weighted(0.6, -50.0..50.0f64), 8);
        (col.clone(), col).prop_map(|(a, b)| {
            let players = ["a", "a", "a", "a", "b", "b", "b", "b"];
            store(&[&a, &b], &players)
        })
    }

    proptest! {
        #[test]
        fn present_values_untouched_and_no_gaps(s in arb_store()) {
            for method in [ImputeMethod::Median, ImputeMethod::Linear, ImputeMethod::Iterative] {
                let (out, _) = impute(&s, method);
                prop_assert_eq!(out.missing_count(), 0);
                for (a, b) in s.records.iter().zip(&out.records) {
                    for (x, y) in a.values.iter().zip(&b.values) {
                        if let Some(v) = x.number() {
                            prop_assert_eq!(v.to_bits(), y.number().unwrap().to_bits());
                        }
                    }
                }
            }
        }

        #[test]
        fn median_is_idempotent(s in arb_store()) {
            let (once, _) = impute(&s, ImputeMethod::Median);
            let (twice, report) = impute(&once, ImputeMethod::Median);
            prop_assert_eq!(once, twice);
            prop_assert_eq!(report.filled, 0);
        }
    }
}
