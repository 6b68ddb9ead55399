use std::collections::BTreeMap;

use chrono::NaiveDate;

use super::{flattened_names, Provenance, WindowError, WindowSample, WindowSet, WindowSpec};
use crate::ingest::PlayerId;
use crate::store::{DailyRecord, FeatureStore};

/// Emits one sample per run of `n_in` consecutive sessions of a player whose
/// span and label horizon both fit in `max_span_days`.
///
/// The label is 1 iff the player has an injury dated in
/// `(anchor_date, date of the n_out-th following session]`, counting
/// off-session injuries too.
pub fn build_windows(store: &FeatureStore, spec: &WindowSpec) -> Result<WindowSet, WindowError> {
    spec.validate()?;
    let features = store.catalog.numeric_in(&spec.groups);
    let base_names: Vec<String> = features
        .iter()
        .map(|&i| store.catalog.features()[i].name.clone())
        .collect();

    let mut sessions: BTreeMap<&PlayerId, Vec<&DailyRecord>> = BTreeMap::new();
    for r in &store.records {
        sessions.entry(&r.player).or_default().push(r);
    }
    let mut injuries: BTreeMap<&PlayerId, Vec<NaiveDate>> = BTreeMap::new();
    for r in store.records.iter().filter(|r| r.injury) {
        injuries.entry(&r.player).or_default().push(r.date);
    }
    for e in &store.off_session_injuries {
        injuries.entry(&e.player).or_default().push(e.date);
    }
    for dates in injuries.values_mut() {
        dates.sort();
    }

    let mut samples = Vec::new();
    for (player, recs) in &sessions {
        let (n_in, n_out) = (spec.n_in, spec.n_out);
        if recs.len() < n_in + n_out {
            continue;
        }
        let injury_dates = injuries.get(player).map(Vec::as_slice).unwrap_or(&[]);
        for start in 0..=recs.len() - n_in - n_out {
            let first = recs[start].date;
            let anchor = recs[start + n_in - 1].date;
            let horizon = recs[start + n_in + n_out - 1].date;
            if (anchor - first).num_days() > spec.max_span_days
                || (horizon - anchor).num_days() > spec.max_span_days
            {
                continue;
            }
            let lo = injury_dates.partition_point(|d| *d <= anchor);
            let label = u8::from(injury_dates.get(lo).is_some_and(|d| *d <= horizon));

            let mut x = Vec::with_capacity(features.len() * n_in);
            for (k, &f) in features.iter().enumerate() {
                for r in &recs[start..start + n_in] {
                    let v = r.values[f].number().ok_or_else(|| WindowError::MissingValue {
                        player: (*player).clone(),
                        date: r.date,
                        feature: base_names[k].clone(),
                    })?;
                    x.push(v);
                }
            }
            debug_assert!((anchor - first).num_days() <= spec.max_span_days);
            samples.push(WindowSample {
                player: (*player).clone(),
                anchor_date: anchor,
                x,
                label,
                provenance: Provenance::Real,
            });
        }
    }

    Ok(WindowSet {
        feature_names: flattened_names(&base_names, spec.n_in),
        n_steps: spec.n_in,
        samples,
    })
}
