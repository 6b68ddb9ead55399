use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;

use super::catalog::INJURY_METADATA;
use super::{DailyRecord, FeatureCatalog, FeatureKind, FeatureStore, SessionType, Value, UNKNOWN};
use crate::features::{derive_loads, srpe, LoadModel, SessionAggregate};
use crate::ingest::{InjuryEvent, MatchStats, PlayerId, SubjectiveField, SubjectiveReport};

/// Linked, validated inputs of the fusion step.
#[derive(Debug, Clone, Default)]
pub struct FuseInputs {
    pub subjective: Vec<SubjectiveReport>,
    pub sessions: Vec<SessionAggregate>,
    /// Values aligned with `match_attributes`.
    pub matches: Vec<MatchStats>,
    pub match_attributes: Vec<String>,
    pub injuries: Vec<InjuryEvent>,
}

type Key = (PlayerId, NaiveDate);

fn gps_values(agg: &SessionAggregate, out: &mut HashMap<String, f64>) {
    out.insert("duration_s".into(), agg.duration_s);
    out.insert("total_distance_m".into(), agg.total_distance_m);
    out.insert("speed_max_ms".into(), agg.speed_max_ms);
    out.insert("speed_mean_ms".into(), agg.speed_mean_ms);
    for z in 0..5 {
        out.insert(format!("speed_zone_{}_s", z + 1), agg.time_in_speed_zone[z]);
        out.insert(format!("hr_zone_{}_s", z + 1), agg.time_in_hr_zone[z]);
    }
    out.insert("sample_count".into(), agg.sample_count as f64);
}

/// Joins all sources on (player, date). GPS sessions define the rows;
/// injuries without a session row go to the off-session side table.
///
/// The output does not depend on the order of any input list.
pub fn fuse(inputs: &FuseInputs, catalog: &FeatureCatalog, load_model: LoadModel) -> FeatureStore {
    let mut grouped: BTreeMap<Key, Vec<&SessionAggregate>> = BTreeMap::new();
    for agg in &inputs.sessions {
        grouped.entry((agg.player.clone(), agg.date)).or_default().push(agg);
    }
    // merge same-day sessions in a canonical order so input order cannot matter
    let sessions: BTreeMap<Key, SessionAggregate> = grouped
        .into_iter()
        .map(|(key, mut list)| {
            list.sort_by(|a, b| {
                (a.sample_count, a.total_distance_m.to_bits(), a.speed_max_ms.to_bits())
                    .cmp(&(b.sample_count, b.total_distance_m.to_bits(), b.speed_max_ms.to_bits()))
            });
            let first = list[0].clone();
            (key, list[1..].iter().fold(first, |acc, s| acc.merge(s)))
        })
        .collect();

    let subjective: BTreeMap<Key, &SubjectiveReport> = inputs
        .subjective
        .iter()
        .map(|r| ((r.player.clone(), r.date), r))
        .collect();
    let matches: BTreeMap<Key, &MatchStats> = inputs
        .matches
        .iter()
        .map(|m| ((m.player.clone(), m.date), m))
        .collect();

    let mut injuries: BTreeMap<Key, Vec<&InjuryEvent>> = BTreeMap::new();
    for e in &inputs.injuries {
        injuries.entry((e.player.clone(), e.date)).or_default().push(e);
    }
    for list in injuries.values_mut() {
        list.sort();
    }

    // per-player daily sRPE series
    let mut daily: BTreeMap<PlayerId, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    for r in subjective.values() {
        if let Some(load) = srpe(r.rpe, r.duration_min) {
            *daily.entry(r.player.clone()).or_default().entry(r.date).or_default() += load;
        }
    }
    let loads: HashMap<Key, _> = daily
        .iter()
        .flat_map(|(player, series)| derive_loads(series, player, load_model))
        .map(|tl| ((tl.player.clone(), tl.date), tl))
        .collect();

    let mut records = Vec::with_capacity(sessions.len());
    for (key, agg) in &sessions {
        let mut num: HashMap<String, f64> = HashMap::new();
        gps_values(agg, &mut num);
        if let Some(r) = subjective.get(key) {
            for field in SubjectiveField::ALL {
                if let Some(v) = r.get(field) {
                    num.insert(field.name().into(), v);
                }
            }
            if let Some(v) = srpe(r.rpe, r.duration_min) {
                num.insert("srpe".into(), v);
            }
        }
        if let Some(tl) = loads.get(key) {
            if subjective.get(key).and_then(|r| srpe(r.rpe, r.duration_min)).is_some() {
                num.insert("daily_load".into(), tl.daily_load);
            }
            for (name, v) in [
                ("weekly_load", tl.weekly_load),
                ("atl", tl.atl),
                ("ctl28", tl.ctl28),
                ("ctl42", tl.ctl42),
                ("monotony", tl.monotony),
                ("strain", tl.strain),
                ("acwr", tl.acwr),
            ] {
                num.insert(name.into(), v);
            }
        }
        let match_stats = matches.get(key);
        if let Some(m) = match_stats {
            for (name, v) in inputs.match_attributes.iter().zip(&m.values) {
                num.insert(name.clone(), *v);
            }
        }

        let injury = injuries.get(key).and_then(|l| l.first().copied());
        let mut cat: HashMap<&str, String> = HashMap::new();
        if let Some(e) = injury {
            for (name, v) in INJURY_METADATA
                .iter()
                .zip([&e.cause, &e.activity, &e.area, &e.body_region])
            {
                cat.insert(name, v.clone());
            }
        }

        let values = catalog
            .features()
            .iter()
            .map(|f| match f.kind {
                FeatureKind::Numeric => Value::Number(num.get(&f.name).copied()),
                FeatureKind::Categorical => Value::Category(
                    cat.get(f.name.as_str())
                        .filter(|s| !s.is_empty())
                        .cloned()
                        .unwrap_or_else(|| UNKNOWN.to_string()),
                ),
            })
            .collect();

        records.push(DailyRecord {
            player: key.0.clone(),
            date: key.1,
            session_type: if match_stats.is_some() {
                SessionType::Match
            } else {
                SessionType::Training
            },
            values,
            injury: injury.is_some(),
        });
    }

    let mut off_session_injuries: Vec<InjuryEvent> = injuries
        .iter()
        .filter(|(key, _)| !sessions.contains_key(*key))
        .flat_map(|(_, list)| list.iter().map(|e| (*e).clone()))
        .collect();
    off_session_injuries.sort();

    FeatureStore {
        catalog: catalog.clone(),
        records,
        off_session_injuries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::PlayerId;
    use proptest::prelude::*;

    fn p(s: &str) -> PlayerId {
        PlayerId::new(s).unwrap()
    }

    fn day(n: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 5, n).unwrap()
    }

    fn agg(player: &str, date: NaiveDate, n: u64) -> SessionAggregate {
        SessionAggregate {
            player: p(player),
            date,
            duration_s: n as f64,
            total_distance_m: 10.0 * n as f64,
            speed_max_ms: 5.0,
            speed_mean_ms: 2.0,
            time_in_speed_zone: [n as f64, 0.0, 0.0, 0.0, 0.0],
            time_in_hr_zone: [0.0; 5],
            sample_count: n,
            hr_zones_unavailable: true,
        }
    }

    fn report(player: &str, date: NaiveDate, rpe: u8, dur: f64) -> SubjectiveReport {
        let mut r = SubjectiveReport::new(p(player), date);
        r.rpe = Some(rpe);
        r.duration_min = Some(dur);
        r.mood = Some(3);
        r
    }

    fn injury(player: &str, date: NaiveDate) -> InjuryEvent {
        InjuryEvent {
            player: p(player),
            date,
            cause: "contact".into(),
            activity: "match".into(),
            area: "knee".into(),
            body_region: "lower_limb".into(),
        }
    }

    fn catalog() -> FeatureCatalog {
        FeatureCatalog::standard(&["goals".to_string(), "fouls".to_string()]).unwrap()
    }

    #[test]
    fn training_session_without_match() {
        let inputs = FuseInputs {
            subjective: vec![report("p1", day(1), 5, 60.0)],
            sessions: vec![agg("p1", day(1), 100)],
            match_attributes: vec!["goals".into(), "fouls".into()],
            ..Default::default()
        };
        let store = fuse(&inputs, &catalog(), LoadModel::Rolling);
        assert_eq!(store.records.len(), 1);
        let r = &store.records[0];
        assert_eq!(r.session_type, SessionType::Training);
        assert!(!r.injury);
        assert_eq!(store.value(r, "goals"), Some(&Value::Number(None)));
        assert_eq!(store.value(r, "srpe"), Some(&Value::Number(Some(300.0))));
        assert_eq!(store.value(r, "mood"), Some(&Value::Number(Some(3.0))));
        assert_eq!(store.value(r, "injury_area"), Some(&Value::Category("unknown".into())));
    }

    #[test]
    fn injury_on_session_day_copies_metadata() {
        let inputs = FuseInputs {
            sessions: vec![agg("p1", day(2), 10)],
            injuries: vec![injury("p1", day(2)), injury("p1", day(9))],
            ..Default::default()
        };
        let store = fuse(&inputs, &catalog(), LoadModel::Rolling);
        let r = &store.records[0];
        assert!(r.injury);
        assert_eq!(store.value(r, "injury_area"), Some(&Value::Category("knee".into())));
        assert_eq!(store.off_session_injuries, vec![injury("p1", day(9))]);
        assert_eq!(store.injury_events().len(), 2);
    }

    #[test]
    fn match_day_sets_session_type() {
        let inputs = FuseInputs {
            sessions: vec![agg("p1", day(3), 10)],
            matches: vec![MatchStats {
                player: p("p1"),
                date: day(3),
                values: vec![1.0, 2.0],
            }],
            match_attributes: vec!["goals".into(), "fouls".into()],
            ..Default::default()
        };
        let store = fuse(&inputs, &catalog(), LoadModel::Rolling);
        let r = &store.records[0];
        assert_eq!(r.session_type, SessionType::Match);
        assert_eq!(store.value(r, "fouls"), Some(&Value::Number(Some(2.0))));
    }

    #[test]
    fn join_matches_nested_loop_oracle() {
        let players = ["p1", "p2", "p3"];
        let mut sessions = Vec::new();
        let mut subjective = Vec::new();
        let mut injuries = Vec::new();
        for (i, pl) in players.iter().enumerate() {
            for d in 1..=2u32 {
                if !(i + d as usize).is_multiple_of(3) {
                    sessions.push(agg(pl, day(d), 10 * d as u64));
                }
                if (i * d as usize).is_multiple_of(2) {
                    subjective.push(report(pl, day(d), d as u8 + 2, 30.0));
                }
                if i == 1 {
                    injuries.push(injury(pl, day(d)));
                }
            }
        }
        let inputs = FuseInputs {
            subjective: subjective.clone(),
            sessions: sessions.clone(),
            injuries: injuries.clone(),
            ..Default::default()
        };
        let store = fuse(&inputs, &catalog(), LoadModel::Rolling);

        let mut expected = Vec::new();
        for s in &sessions {
            let mood = subjective
                .iter()
                .find(|r| r.player == s.player && r.date == s.date)
                .and_then(|r| r.mood)
                .map(f64::from);
            let hurt = injuries.iter().any(|e| e.player == s.player && e.date == s.date);
            expected.push((s.player.clone(), s.date, mood, hurt));
        }
        expected.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
        let got: Vec<_> = store
            .records
            .iter()
            .map(|r| (r.player.clone(), r.date, store.value(r, "mood").unwrap().number(), r.injury))
            .collect();
        assert!(got.len() <= 6);
        assert_eq!(got, expected);
    }

    proptest! {
        #[test]
        fn order_independent(seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut sessions: Vec<_> = (1..=6u32).flat_map(|d| [agg("a", day(d), d as u64), agg("b", day(d), 2)]).collect();
            sessions.push(agg("a", day(2), 7));
            let mut subjective: Vec<_> = (1..=6u32).map(|d| report("a", day(d), (d % 10) as u8, 45.0)).collect();
            let mut injuries = vec![injury("a", day(3)), injury("b", day(8)), injury("b", day(3))];
            let base = fuse(&FuseInputs { subjective: subjective.clone(), sessions: sessions.clone(),
                injuries: injuries.clone(), ..Default::default() }, &catalog(), LoadModel::Rolling);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            sessions.shuffle(&mut rng);
            subjective.shuffle(&mut rng);
            injuries.shuffle(&mut rng);
            let shuffled = fuse(&FuseInputs { subjective, sessions, injuries, ..Default::default() },
                &catalog(), LoadModel::Rolling);
            prop_assert_eq!(base, shuffled);
        }
    }
}
