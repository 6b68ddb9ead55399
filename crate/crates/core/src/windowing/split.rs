use rand::seq::SliceRandom;

use super::{Provenance, SplitBy, WindowError, WindowSample, WindowSpec};
use crate::rng::{stream, Purpose};

/// Sample indices of one MCCV round, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random split for round `round_index`, fixed by `(spec.seed, round_index)`.
///
/// With [`SplitBy::Window`] each class contributes `round(test_fraction * n)`
/// real samples to test (at least one, leaving at least one in train).
/// Synthetic samples always stay in train.
pub fn split(samples: &[WindowSample], spec: &WindowSpec, round_index: usize) -> Result<Split, WindowError> {
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, s) in samples.iter().enumerate() {
        if s.provenance == Provenance::Real {
            by_class[usize::from(s.label == 1)].push(i);
        }
    }
    for (label, idx) in by_class.iter().enumerate() {
        if idx.len() < 2 {
            return Err(WindowError::ClassTooSmall {
                label: label as u8,
                count: idx.len(),
            });
        }
    }

    let mut rng = stream(spec.seed, Purpose::Split, round_index as u64);
    let mut in_test = vec![false; samples.len()];
    match spec.split_by {
        SplitBy::Window => {
            for mut idx in by_class {
                idx.shuffle(&mut rng);
                let n = idx.len();
                let k = ((spec.test_fraction * n as f64).round() as usize).clamp(1, n - 1);
                for &i in &idx[..k] {
                    in_test[i] = true;
                }
            }
        }
        SplitBy::Player => {
            let real: Vec<usize> = by_class.concat();
            let mut players: Vec<_> = real.iter().map(|&i| &samples[i].player).collect();
            players.sort();
            players.dedup();
            players.shuffle(&mut rng);
            let target = (spec.test_fraction * real.len() as f64).round() as usize;
            let mut taken = 0;
            for p in players {
                if taken >= target.max(1) {
                    break;
                }
                for &i in &real {
                    if &samples[i].player == p {
                        in_test[i] = true;
                        taken += 1;
                    }
                }
            }
        }
    }

    let (test, train): (Vec<usize>, Vec<usize>) = (0..samples.len()).partition(|&i| in_test[i]);
    Ok(Split { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::PlayerId;
    use chrono::NaiveDate;

    fn samples(neg: usize, pos: usize) -> Vec<WindowSample> {
        (0..neg + pos)
            .map(|i| WindowSample {
                player: PlayerId::new(format!("p{}", i % 10)).unwrap(),
                anchor_date: NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + chrono::Duration::days(i as i64),
                x: vec![i as f64],
                label: u8::from(i >= neg),
                provenance: Provenance::Real,
            })
            .collect()
    }

    #[test]
    fn stratified_counts() {
        let s = samples(80, 20);
        let sp = split(&s, &WindowSpec::default(), 0).unwrap();
        let pos = sp.test.iter().filter(|&&i| s[i].label == 1).count();
        assert_eq!((sp.test.len() - pos, pos), (16, 4));
        assert_eq!(sp.train.len(), 80);
    }

    #[test]
    fn deterministic_per_round() {
        let s = samples(80, 20);
        let spec = WindowSpec::default();
        assert_eq!(split(&s, &spec, 3).unwrap(), split(&s, &spec, 3).unwrap());
        assert_ne!(split(&s, &spec, 0).unwrap().test, split(&s, &spec, 1).unwrap().test);
    }

    #[test]
    fn disjoint_and_complete() {
        let s = samples(50, 13);
        let sp = split(&s, &WindowSpec::default(), 5).unwrap();
        let mut all: Vec<usize> = sp.train.iter().chain(&sp.test).copied().collect();
        all.sort();
        assert_eq!(all, (0..s.len()).collect::<Vec<_>>());
    }

    #[test]
    fn synthetic_never_in_test() {
        let mut s = samples(40, 10);
        for w in s.iter_mut().step_by(3) {
            w.provenance = Provenance::Synthetic;
        }
        for round in 0..10 {
            let sp = split(&s, &WindowSpec::default(), round).unwrap();
            assert!(sp.test.iter().all(|&i| s[i].provenance == Provenance::Real));
        }
    }

    #[test]
    fn tiny_class_is_an_error() {
        let s = samples(30, 1);
        assert!(matches!(
            split(&s, &WindowSpec::default(), 0),
            Err(WindowError::ClassTooSmall { label: 1, count: 1 })
        ));
    }

    #[test]
    fn player_split_keeps_players_whole() {
        let s = samples(80, 20);
        let spec = WindowSpec { split_by: SplitBy::Player, ..Default::default() };
        let sp = split(&s, &spec, 0).unwrap();
        let test_players: std::collections::BTreeSet<_> = sp.test.iter().map(|&i| &s[i].player).collect();
        assert!(sp.train.iter().all(|&i| !test_players.contains(&s[i].player)));
        assert_eq!(sp.test.len(), 20);
    }
}
