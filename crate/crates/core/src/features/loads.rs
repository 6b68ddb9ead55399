//! Training-load metrics from daily session-RPE totals.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ingest::PlayerId;
use crate::scalar::Scalar;

/// Threshold below which a denominator counts as zero.
pub const EPSILON: f64 = 1e-9;

const ACUTE_DAYS: usize = 7;
const CHRONIC_SHORT_DAYS: usize = 28;
const CHRONIC_LONG_DAYS: usize = 42;

/// How acute and chronic loads are averaged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadModel {
    /// Trailing arithmetic means.
    #[default]
    Rolling,
    /// Exponentially weighted means with smoothing 2 / (N + 1).
    Ewma,
}

/// Session RPE: RPE (0-10) times duration in minutes.
pub fn srpe<T: Scalar>(rpe: Option<u8>, duration_min: Option<T>) -> Option<T> {
    Some(T::from_u8(rpe?)? * duration_min?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLoadFeatures<T> {
    pub player: PlayerId,
    pub date: NaiveDate,
    pub daily_load: T,
    pub weekly_load: T,
    pub atl: T,
    pub ctl28: T,
    pub ctl42: T,
    pub monotony: T,
    pub strain: T,
    pub acwr: T,
    /// The chronic window reaches back before the start of the series.
    pub partial_window: bool,
}

fn mean<T: Scalar>(xs: &[T]) -> T {
    xs.iter().copied().sum::<T>() / T::from_usize_lossy(xs.len())
}

fn population_sd<T: Scalar>(xs: &[T]) -> T {
    let m = mean(xs);
    let ss: T = xs.iter().map(|x| (*x - m) * (*x - m)).sum();
    (ss / T::from_usize_lossy(xs.len())).sqrt()
}

fn trailing<T>(xs: &[T], end: usize, days: usize) -> &[T] {
    &xs[(end + 1).saturating_sub(days)..=end]
}

fn ratio<T: Scalar>(num: T, den: T) -> T {
    if den < T::lit(EPSILON) {
        T::zero()
    } else {
        num / den
    }
}

/// Derives one feature row per calendar day from the first to the last date
/// of `daily`. Days missing from the map carry zero load.
pub fn derive_loads<T: Scalar>(
    daily: &BTreeMap<NaiveDate, T>,
    player: &PlayerId,
    model: LoadModel,
) -> Vec<TrainingLoadFeatures<T>> {
    let (Some((&first, _)), Some((&last, _))) = (daily.first_key_value(), daily.last_key_value())
    else {
        return Vec::new();
    };
    let days: Vec<NaiveDate> = first.iter_days().take_while(|d| *d <= last).collect();
    let loads: Vec<T> = days
        .iter()
        .map(|d| daily.get(d).copied().unwrap_or_else(T::zero))
        .collect();

    let mut ewma: Option<[T; 3]> = None;
    let smoothing = |n: usize| T::lit(2.0 / (n as f64 + 1.0));

    days.iter()
        .enumerate()
        .map(|(i, &date)| {
            let week = trailing(&loads, i, ACUTE_DAYS);
            let weekly_load: T = week.iter().copied().sum();
            let monotony = ratio(mean(week), population_sd(week));
            let (atl, ctl28, ctl42) = match model {
                LoadModel::Rolling => (
                    mean(week),
                    mean(trailing(&loads, i, CHRONIC_SHORT_DAYS)),
                    mean(trailing(&loads, i, CHRONIC_LONG_DAYS)),
                ),
                LoadModel::Ewma => {
                    let x = loads[i];
                    let next = match ewma {
                        None => [x; 3],
                        Some(prev) => {
                            let spans = [ACUTE_DAYS, CHRONIC_SHORT_DAYS, CHRONIC_LONG_DAYS];
                            std::array::from_fn(|k| {
                                let a = smoothing(spans[k]);
                                a * x + (T::one() - a) * prev[k]
                            })
                        }
                    };
                    ewma = Some(next);
                    (next[0], next[1], next[2])
                }
            };
            TrainingLoadFeatures {
                player: player.clone(),
                date,
                daily_load: loads[i],
                weekly_load,
                atl,
                ctl28,
                ctl42,
                monotony,
                strain: weekly_load * monotony,
                acwr: ratio(atl, ctl28),
                partial_window: i + 1 < CHRONIC_LONG_DAYS,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> PlayerId {
        PlayerId::new("p1").unwrap()
    }

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 1, 1).unwrap()
    }

    fn series(values: &[f64], offset: i64) -> BTreeMap<NaiveDate, f64> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (start() + chrono::Duration::days(i as i64 + offset), *v))
            .collect()
    }

    #[test]
    fn srpe_products() {
        assert_eq!(srpe(Some(0), Some(90.0)), Some(0.0));
        assert_eq!(srpe(Some(7), Some(60.0)), Some(420.0));
        assert_eq!(srpe(Some(10), Some(0.0f32)), Some(0.0));
        assert_eq!(srpe::<f64>(None, Some(60.0)), None);
        assert_eq!(srpe::<f64>(Some(5), None), None);
    }

    #[test]
    fn constant_series_closed_form() {
        let out = derive_loads(&series(&[100.0; 42], 0), &p(), LoadModel::Rolling);
        let last = out.last().unwrap();
        assert_eq!(last.weekly_load, 700.0);
        assert_eq!(last.atl, 100.0);
        assert_eq!(last.ctl28, 100.0);
        assert_eq!(last.ctl42, 100.0);
        assert_eq!(last.acwr, 1.0);
        assert_eq!(last.monotony, 0.0);
        assert_eq!(last.strain, 0.0);
        assert!(!last.partial_window);
        assert!(out[40].partial_window);
    }

    #[test]
    fn single_session_in_week() {
        let mut values = [0.0; 7];
        values[6] = 300.0;
        let out = derive_loads(&series(&values, 0), &p(), LoadModel::Rolling);
        let last = out.last().unwrap();
        assert_eq!(last.weekly_load, 300.0);
        assert!((last.atl - 300.0 / 7.0).abs() < 1e-12);
        // hand-computed: mean 300/7, population sd = sqrt(6 * m^2 + (300 - m)^2) / sqrt(7)
        let m = 300.0 / 7.0;
        let sd = ((6.0 * m * m + (300.0 - m) * (300.0 - m)) / 7.0f64).sqrt();
        assert!((last.monotony - m / sd).abs() < 1e-12);
    }

    #[test]
    fn gaps_count_as_rest_days() {
        let mut daily = BTreeMap::new();
        daily.insert(start(), 70.0);
        daily.insert(start() + chrono::Duration::days(3), 70.0);
        let out = derive_loads(&daily, &p(), LoadModel::Rolling);
        assert_eq!(out.len(), 4);
        assert_eq!(out[1].daily_load, 0.0);
        assert_eq!(out[3].weekly_load, 140.0);
        assert_eq!(out[3].atl, 35.0);
    }

    #[test]
    fn zero_series_all_zero() {
        for model in [LoadModel::Rolling, LoadModel::Ewma] {
            for row in derive_loads(&series(&[0.0; 20], 0), &p(), model) {
                for v in [row.weekly_load, row.atl, row.ctl28, row.ctl42, row.monotony, row.strain, row.acwr] {
                    assert_eq!(v, 0.0);
                }
            }
        }
        assert!(derive_loads::<f64>(&BTreeMap::new(), &p(), LoadModel::Rolling).is_empty());
    }

    #[test]
    fn ewma_of_constant_is_constant() {
        let out = derive_loads(&series(&[50.0; 30], 0), &p(), LoadModel::Ewma);
        for row in &out {
            assert!((row.atl - 50.0).abs() < 1e-9 && (row.ctl42 - 50.0).abs() < 1e-9);
            assert!((row.acwr - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn works_for_f32() {
        let daily: BTreeMap<NaiveDate, f32> = series(&[100.0; 42], 0)
            .into_iter()
            .map(|(d, v)| (d, v as f32))
            .collect();
        let last = derive_loads(&daily, &p(), LoadModel::Rolling).pop().unwrap();
        assert_eq!(last.weekly_load, 700.0f32);
        assert_eq!(last.acwr, 1.0f32);
    }

    proptest! {
        #[test]
        fn scaling_properties(values in proptest::collection::vec(0.0..900.0f64, 1..60), c in 0.01..50.0f64) {
            let base = derive_loads(&series(&values, 0), &p(), LoadModel::Rolling);
            let scaled_in: Vec<f64> = values.iter().map(|v| v * c).collect();
            let scaled = derive_loads(&series(&scaled_in, 0), &p(), LoadModel::Rolling);
            for (a, b) in base.iter().zip(&scaled) {
                let close = |x: f64, y: f64| (x * c - y).abs() <= 1e-9 * (x * c).abs().max(1.0);
                prop_assert!(close(a.weekly_load, b.weekly_load));
                prop_assert!(close(a.atl, b.atl));
                prop_assert!(close(a.ctl28, b.ctl28));
                prop_assert!(close(a.strain, b.strain));
                if a.ctl28 > 1e-6 {
                    prop_assert!((a.acwr - b.acwr).abs() <= 1e-12);
                }
                prop_assert!((a.monotony - b.monotony).abs() <= 1e-9 * a.monotony.max(1.0));
            }
        }

        #[test]
        fn time_translation(values in proptest::collection::vec(0.0..900.0f64, 1..50), k in 1i64..400) {
            let a = derive_loads(&series(&values, 0), &p(), LoadModel::Rolling);
            let b = derive_loads(&series(&values, k), &p(), LoadModel::Rolling);
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(x.date + chrono::Duration::days(k), y.date);
                prop_assert_eq!((x.weekly_load, x.atl, x.ctl28, x.ctl42, x.monotony, x.acwr),
                                (y.weekly_load, y.atl, y.ctl28, y.ctl42, y.monotony, y.acwr));
            }
        }

        #[test]
        fn weekly_is_exact_trailing_sum(values in proptest::collection::vec(0u32..1000, 1..40)) {
            let fl: Vec<f64> = values.iter().map(|v| *v as f64).collect();
            let out = derive_loads(&series(&fl, 0), &p(), LoadModel::Rolling);
            for (i, row) in out.iter().enumerate() {
                let lo = i.saturating_sub(6);
                let expected: u32 = values[lo..=i].iter().sum();
                prop_assert_eq!(row.weekly_load, expected as f64);
                prop_assert!(row.monotony >= 0.0 && row.acwr >= 0.0);
            }
        }
    }
}
