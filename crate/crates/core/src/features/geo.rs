use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::ingest::{GpsSample, PlayerId};
use crate::scalar::Scalar;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Great-circle distance in meters between two points given in degrees.
pub fn haversine_m<T: Scalar>(lat1: T, lon1: T, lat2: T, lon2: T) -> T {
    let two = T::lit(2.0);
    let (phi1, phi2) = (lat1.to_radians(), lat2.to_radians());
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let a = (dphi / two).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / two).sin().powi(2);
    two * T::lit(EARTH_RADIUS_M) * a.sqrt().min(T::one()).asin()
}

fn truncate_to_second(t: DateTime<Utc>) -> DateTime<Utc> {
    DateTime::from_timestamp(t.timestamp(), 0).expect("in-range timestamp")
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Collapses samples sharing a whole second into their mean.
///
/// Position, speed and heart rate are averaged; the weakest satellite count
/// and worst HDOP of the second are kept. Seconds without samples produce no
/// output.
pub fn downsample_1hz(samples: &[GpsSample]) -> Vec<GpsSample> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < samples.len() {
        let second = truncate_to_second(samples[start].timestamp);
        let end = start
            + samples[start..]
                .iter()
                .take_while(|s| truncate_to_second(s.timestamp) == second)
                .count();
        let group = &samples[start..end];
        out.push(GpsSample {
            player: group[0].player.clone(),
            timestamp: second,
            lat: mean(group.iter().map(|s| s.lat)).unwrap(),
            lon: mean(group.iter().map(|s| s.lon)).unwrap(),
            speed_kmh: mean(group.iter().map(|s| s.speed_kmh)).unwrap(),
            heart_rate_bpm: mean(group.iter().filter_map(|s| s.heart_rate_bpm)),
            satellites: group.iter().filter_map(|s| s.satellites).min(),
            hdop: group.iter().filter_map(|s| s.hdop).reduce(f64::max),
        });
        start = end;
    }
    out
}

/// Speed zone bounds in km/h and heart-rate zone bounds in percent of the
/// player's maximum heart rate. Values below the first bound fall in zone 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZoneConfig {
    pub speed_kmh: [f64; 4],
    pub hr_pct: [f64; 4],
    pub max_hr_bpm: BTreeMap<PlayerId, f64>,
}

impl Default for ZoneConfig {
    fn default() -> Self {
        ZoneConfig {
            speed_kmh: [7.0, 14.0, 20.0, 25.0],
            hr_pct: [60.0, 70.0, 80.0, 90.0],
            max_hr_bpm: BTreeMap::new(),
        }
    }
}

fn zone_index(bounds: &[f64; 4], value: f64) -> usize {
    bounds.iter().filter(|b| value >= **b).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionAggregate {
    pub player: PlayerId,
    pub date: NaiveDate,
    pub duration_s: f64,
    pub total_distance_m: f64,
    pub speed_max_ms: f64,
    pub speed_mean_ms: f64,
    pub time_in_speed_zone: [f64; 5],
    pub time_in_hr_zone: [f64; 5],
    pub sample_count: u64,
    /// No max heart rate configured for this player; HR zone times are zero.
    pub hr_zones_unavailable: bool,
}

impl SessionAggregate {
    /// Combines two sessions of the same player-day.
    pub fn merge(&self, other: &SessionAggregate) -> SessionAggregate {
        let n = self.sample_count + other.sample_count;
        let speed_mean_ms = if n == 0 {
            0.0
        } else {
            (self.speed_mean_ms * self.sample_count as f64
                + other.speed_mean_ms * other.sample_count as f64)
                / n as f64
        };
        let add = |a: [f64; 5], b: [f64; 5]| std::array::from_fn(|i| a[i] + b[i]);
        SessionAggregate {
            player: self.player.clone(),
            date: self.date,
            duration_s: self.duration_s + other.duration_s,
            total_distance_m: self.total_distance_m + other.total_distance_m,
            speed_max_ms: self.speed_max_ms.max(other.speed_max_ms),
            speed_mean_ms,
            time_in_speed_zone: add(self.time_in_speed_zone, other.time_in_speed_zone),
            time_in_hr_zone: add(self.time_in_hr_zone, other.time_in_hr_zone),
            sample_count: n,
            hr_zones_unavailable: self.hr_zones_unavailable || other.hr_zones_unavailable,
        }
    }
}

/// Aggregates 1 Hz samples of one player-session. Each sample accounts for
/// one second of zone time.
pub fn aggregate_session(
    player: &PlayerId,
    date: NaiveDate,
    samples: &[GpsSample],
    zones: &ZoneConfig,
) -> SessionAggregate {
    let max_hr = zones.max_hr_bpm.get(player).copied();
    let mut speed_zone = [0.0; 5];
    let mut hr_zone = [0.0; 5];
    let mut speed_sum = 0.0;
    let mut speed_max: f64 = 0.0;
    for s in samples {
        speed_zone[zone_index(&zones.speed_kmh, s.speed_kmh)] += 1.0;
        speed_sum += s.speed_kmh;
        speed_max = speed_max.max(s.speed_kmh);
        if let (Some(hr), Some(max)) = (s.heart_rate_bpm, max_hr) {
            hr_zone[zone_index(&zones.hr_pct, 100.0 * hr / max)] += 1.0;
        }
    }
    let total_distance_m = samples
        .windows(2)
        .map(|w| haversine_m(w[0].lat, w[0].lon, w[1].lat, w[1].lon))
        .sum();
    let n = samples.len();
    SessionAggregate {
        player: player.clone(),
        date,
        duration_s: n as f64,
        total_distance_m,
        speed_max_ms: speed_max / 3.6,
        speed_mean_ms: if n == 0 { 0.0 } else { speed_sum / n as f64 / 3.6 },
        time_in_speed_zone: speed_zone,
        time_in_hr_zone: hr_zone,
        sample_count: n as u64,
        hr_zones_unavailable: max_hr.is_none(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};
    use proptest::prelude::*;

    fn p() -> PlayerId {
        PlayerId::new("p1").unwrap()
    }

    fn at(ms: i64, lat: f64, lon: f64, speed: f64) -> GpsSample {
        GpsSample {
            player: p(),
            timestamp: Utc.with_ymd_and_hms(2021, 5, 1, 10, 0, 0).unwrap() + Duration::milliseconds(ms),
            lat,
            lon,
            speed_kmh: speed,
            heart_rate_bpm: Some(150.0),
            satellites: Some(9),
            hdop: Some(0.7),
        }
    }

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 5, 1).unwrap()
    }

    #[test]
    fn haversine_identical_point_is_zero() {
        assert_eq!(haversine_m(59.0, 10.0, 59.0, 10.0), 0.0);
        assert_eq!(haversine_m(59.0f32, 10.0, 59.0, 10.0), 0.0);
    }

    #[test]
    fn haversine_matches_arc_length_oracles() {
        let equator = EARTH_RADIUS_M * 0.001f64.to_radians();
        assert!((haversine_m(0.0, 0.0, 0.0, 0.001) - equator).abs() < 0.01);
        assert!((equator - 111.19).abs() < 0.01);
        let meridian = EARTH_RADIUS_M * 0.0001f64.to_radians();
        assert!((haversine_m(59.95, 10.75, 59.9501, 10.75) - meridian).abs() < 0.01);
        assert!((meridian - 11.12).abs() < 0.01);
    }

    #[test]
    fn downsample_averages_within_second() {
        let samples: Vec<_> = (0..10).map(|i| at(i * 100, 0.0, 0.0, 10.0 + i as f64)).collect();
        let out = downsample_1hz(&samples);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].speed_kmh, 14.5);
    }

    #[test]
    fn downsample_single_sample_truncates_time_only() {
        let s = at(1_250, 59.0, 10.0, 3.0);
        let out = downsample_1hz(std::slice::from_ref(&s));
        assert_eq!(out[0].timestamp, at(1_000, 0.0, 0.0, 0.0).timestamp);
        assert_eq!((out[0].lat, out[0].lon, out[0].speed_kmh), (s.lat, s.lon, s.speed_kmh));
    }

    #[test]
    fn downsample_invents_no_gap_seconds() {
        let out = downsample_1hz(&[at(0, 0.0, 0.0, 1.0), at(2_100, 0.0, 0.0, 1.0)]);
        assert_eq!(out.len(), 2);
        assert!(downsample_1hz(&[]).is_empty());
    }

    #[test]
    fn constant_speed_fills_one_zone() {
        let samples: Vec<_> = (0..60).map(|i| at(i * 1000, 59.0, 10.0, 10.0)).collect();
        let agg = aggregate_session(&p(), date(), &samples, &ZoneConfig::default());
        assert_eq!(agg.time_in_speed_zone, [0.0, 60.0, 0.0, 0.0, 0.0]);
        assert_eq!(agg.total_distance_m, 0.0);
        assert_eq!(agg.duration_s, 60.0);
        assert!(agg.hr_zones_unavailable);
        assert_eq!(agg.time_in_hr_zone, [0.0; 5]);
        assert!((agg.speed_mean_ms - 10.0 / 3.6).abs() < 1e-12);
    }

    #[test]
    fn straight_walk_along_equator() {
        // 1 m/s eastward: one meter of arc per second
        let deg_per_m = (1.0 / EARTH_RADIUS_M).to_degrees();
        let samples: Vec<_> = (0..=100)
            .map(|i| at(i * 1000, 0.0, i as f64 * deg_per_m, 3.6))
            .collect();
        let agg = aggregate_session(&p(), date(), &samples, &ZoneConfig::default());
        assert!((agg.total_distance_m - 100.0).abs() < 0.5);
        assert_eq!(agg.sample_count, 101);
    }

    #[test]
    fn hr_zones_from_player_max() {
        let mut zones = ZoneConfig::default();
        zones.max_hr_bpm.insert(p(), 200.0);
        // 150 of 200 = 75% -> zone 3
        let samples: Vec<_> = (0..5).map(|i| at(i * 1000, 0.0, 0.0, 1.0)).collect();
        let agg = aggregate_session(&p(), date(), &samples, &zones);
        assert_eq!(agg.time_in_hr_zone, [0.0, 0.0, 5.0, 0.0, 0.0]);
        assert!(!agg.hr_zones_unavailable);
    }

    #[test]
    fn fewer_than_two_samples_have_zero_distance() {
        let agg = aggregate_session(&p(), date(), &[at(0, 1.0, 1.0, 5.0)], &ZoneConfig::default());
        assert_eq!(agg.total_distance_m, 0.0);
        let empty = aggregate_session(&p(), date(), &[], &ZoneConfig::default());
        assert_eq!(empty.duration_s, 0.0);
    }

    proptest! {
        #[test]
        fn distance_and_zone_partition(steps in proptest::collection::vec(
            (-0.0005..0.0005f64, -0.0005..0.0005f64, 0.0..39.0f64), 1..80)) {
            let mut lat = 59.9;
            let mut lon = 10.7;
            let samples: Vec<_> = steps.iter().enumerate().map(|(i, (dl, dn, v))| {
                lat += dl;
                lon += dn;
                at(i as i64 * 1000, lat, lon, *v)
            }).collect();
            let agg = aggregate_session(&p(), date(), &samples, &ZoneConfig::default());
            let oracle: f64 = (1..samples.len())
                .map(|i| haversine_m(samples[i - 1].lat, samples[i - 1].lon, samples[i].lat, samples[i].lon))
                .sum();
            prop_assert!((agg.total_distance_m - oracle).abs() <= 1e-9 * oracle.max(1.0));
            prop_assert_eq!(agg.time_in_speed_zone.iter().sum::<f64>(), agg.duration_s);
            prop_assert!(agg.speed_max_ms >= agg.speed_mean_ms);
        }
    }
}
