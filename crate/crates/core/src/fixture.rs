//! Deterministic synthetic raw data: a small squad with GPS sessions,
//! wellness reports, matches and planted injuries. Used by tests, the
//! acceptance suite and the `fixture` CLI command.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate, TimeDelta};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::ZoneConfig;
use crate::ingest::{
    body_region, default_match_attributes, write_gps_session, write_injury_reports, write_match_stats,
    write_subjective, GpsSample, GpsSession, IngestError, InjuryEvent, MatchStats, PlayerId, RawInjuryRow,
    RosterEntry, SubjectiveReport,
};
use crate::rng::{stream, Purpose};
use crate::store::{preprocess, FeatureStore, PreprocessOptions, PreprocessReport, RawTables, StoreError};

pub const GPS_DIR: &str = "gps";
pub const SUBJECTIVE_DIR: &str = "subjective";
pub const MATCHES_FILE: &str = "matches.csv";
pub const INJURIES_FILE: &str = "injuries.csv";
pub const ROSTER_FILE: &str = "roster.json";

const NAMES: [&str; 12] = [
    "Anna Berg",
    "Maria Lund",
    "Ingrid Dahl",
    "Sofie Moen",
    "Nora Haugen",
    "Emma Strand",
    "Ida Bakke",
    "Thea Solberg",
    "Sara Nilsen",
    "Julie Holm",
    "Hanna Vik",
    "Marte Lie",
];
const CAUSES: [&str; 3] = ["overuse", "contact", "non-contact"];
const AREAS: [&str; 7] = ["knee", "ankle", "hamstring", "groin", "shoulder", "head", "lower back"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureSpec {
    pub players: usize,
    pub sessions: usize,
    pub injuries: usize,
    pub seed: u64,
    pub start: NaiveDate,
    /// Raw GPS rows per session, recorded at 2 Hz.
    pub gps_rows: usize,
    /// Share of GPS rows made implausible.
    pub implausible_fraction: f64,
    /// Share of wellness cells left empty.
    pub missing_fraction: f64,
    /// Every k-th session of a player is a match.
    pub match_every: usize,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            players: 8,
            sessions: 400,
            injuries: 12,
            seed: 7,
            start: NaiveDate::from_ymd_opt(2021, 1, 4).expect("valid date"),
            gps_rows: 40,
            implausible_fraction: 0.03,
            missing_fraction: 0.04,
            match_every: 6,
        }
    }
}

/// Generated sources plus the ground truth they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFixture {
    pub roster: Vec<RosterEntry>,
    pub max_hr_bpm: BTreeMap<PlayerId, f64>,
    pub sessions: Vec<GpsSession>,
    pub subjective: Vec<SubjectiveReport>,
    pub match_attributes: Vec<String>,
    pub matches: Vec<MatchStats>,
    pub injury_rows: Vec<RawInjuryRow>,
    /// The injuries as planted, keyed by player id.
    pub planted: Vec<InjuryEvent>,
}

fn chance(rng: &mut ChaCha8Rng, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// Drops one interior letter, a single-edit typo.
fn misspell(name: &str, rng: &mut ChaCha8Rng) -> String {
    let chars: Vec<char> = name.chars().collect();
    let k = rng.random_range(1..chars.len() - 1);
    chars.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, c)| c).collect()
}

impl RawFixture {
    pub fn generate(spec: &FixtureSpec) -> RawFixture {
        assert!(spec.players >= 1 && spec.players <= NAMES.len(), "1..=12 players");
        let mut rng = stream(spec.seed, Purpose::Fixture, 0);
        let roster: Vec<RosterEntry> = (0..spec.players)
            .map(|i| RosterEntry {
                id: PlayerId::new(format!("p{}", i + 1)).expect("non-empty"),
                name: NAMES[i].to_string(),
            })
            .collect();
        let max_hr_bpm = roster
            .iter()
            .map(|r| (r.id.clone(), f64::from(rng.random_range(185..205u32))))
            .collect();

        // session dates: mostly 1-3 days apart, occasionally a long break
        let per_player: Vec<usize> = (0..spec.players)
            .map(|i| spec.sessions / spec.players + usize::from(i < spec.sessions % spec.players))
            .collect();
        let mut dates: Vec<Vec<NaiveDate>> = Vec::new();
        for (i, &n) in per_player.iter().enumerate() {
            let mut d = spec.start + Days::new(i as u64 % 3);
            let mut list = Vec::with_capacity(n);
            for _ in 0..n {
                list.push(d);
                let gap = if chance(&mut rng, 0.04) {
                    rng.random_range(15..21)
                } else {
                    rng.random_range(1..4)
                };
                d = d + Days::new(gap);
            }
            dates.push(list);
        }

        // injuries at distinct (player, session) slots after some history
        let slots: Vec<(usize, usize)> = per_player
            .iter()
            .enumerate()
            .flat_map(|(p, &n)| (3..n).map(move |k| (p, k)))
            .collect();
        let mut chosen: Vec<(usize, usize)> = sample(&mut rng, slots.len(), spec.injuries.min(slots.len()))
            .into_iter()
            .map(|i| slots[i])
            .collect();
        chosen.sort();
        let mut planted = Vec::new();
        let mut injury_rows = Vec::new();
        let mut strained: BTreeMap<(usize, usize), ()> = BTreeMap::new();
        for &(p, k) in &chosen {
            // every third injury happens on a rest day after the session
            let date = dates[p][k] + Days::new(u64::from(planted.len() % 3 == 2));
            let area = AREAS[rng.random_range(0..AREAS.len())];
            let cause = CAUSES[rng.random_range(0..CAUSES.len())];
            let activity = if k % spec.match_every == spec.match_every - 1 { "match" } else { "training" };
            planted.push(InjuryEvent {
                player: roster[p].id.clone(),
                date,
                cause: cause.into(),
                activity: activity.into(),
                area: area.into(),
                body_region: body_region(area).into(),
            });
            let name = if planted.len() % 2 == 0 {
                misspell(&roster[p].name, &mut rng)
            } else {
                roster[p].name.to_uppercase()
            };
            injury_rows.push(RawInjuryRow {
                name,
                date,
                cause: cause.into(),
                activity: activity.into(),
                area: area.into(),
            });
            for back in 1..=3 {
                strained.insert((p, k.saturating_sub(back)), ());
            }
        }

        let match_attributes = default_match_attributes();
        let mut sessions = Vec::new();
        let mut subjective = Vec::new();
        let mut matches = Vec::new();
        for (p, list) in dates.iter().enumerate() {
            let player = &roster[p].id;
            for (k, &date) in list.iter().enumerate() {
                let hard = strained.contains_key(&(p, k));
                let is_match = k % spec.match_every == spec.match_every - 1;
                sessions.push(Self::gps_session(spec, &mut rng, player, date, hard));
                let mut r = SubjectiveReport::new(player.clone(), date);
                let miss = spec.missing_fraction;
                let cell = |rng: &mut ChaCha8Rng, lo: u8, hi: u8| {
                    if chance(rng, miss) {
                        None
                    } else {
                        Some(rng.random_range(lo..=hi))
                    }
                };
                r.rpe = if hard { cell(&mut rng, 8, 10) } else { cell(&mut rng, 2, 8) };
                r.duration_min = Some(f64::from(rng.random_range(45..=if is_match { 95 } else { 110u32 })));
                r.fatigue = if hard { cell(&mut rng, 1, 2) } else { cell(&mut rng, 2, 5) };
                r.mood = cell(&mut rng, 1, 5);
                r.readiness = cell(&mut rng, 1, 5);
                r.soreness = if hard { cell(&mut rng, 1, 2) } else { cell(&mut rng, 2, 5) };
                r.stress = cell(&mut rng, 1, 5);
                r.sleep_duration_h = if chance(&mut rng, miss) {
                    None
                } else {
                    Some(f64::from(rng.random_range(10..=18u32)) / 2.0)
                };
                r.sleep_quality = cell(&mut rng, 1, 5);
                subjective.push(r);
                if is_match {
                    matches.push(MatchStats {
                        player: player.clone(),
                        date,
                        values: (0..match_attributes.len())
                            .map(|_| f64::from(rng.random_range(0..12u32)))
                            .collect(),
                    });
                }
            }
        }
        RawFixture {
            roster,
            max_hr_bpm,
            sessions,
            subjective,
            match_attributes,
            matches,
            injury_rows,
            planted,
        }
    }

    fn gps_session(spec: &FixtureSpec, rng: &mut ChaCha8Rng, player: &PlayerId, date: NaiveDate, hard: bool) -> GpsSession {
        let start = date.and_hms_opt(17, 0, 0).expect("valid time").and_utc();
        let (mut lat, mut lon) = (59.9127, 10.7461);
        let top = if hard { 32.0 } else { 26.0 };
        let samples = (0..spec.gps_rows)
            .map(|i| {
                let speed_kmh: f64 = rng.random_range(0.0..top);
                // 0.5 s of movement, roughly north-east
                let step_m = speed_kmh / 3.6 * 0.5;
                lat += step_m / 111_320.0 * 0.7;
                lon += step_m / (111_320.0 * lat.to_radians().cos()) * 0.7;
                let mut s = GpsSample {
                    player: player.clone(),
                    timestamp: start + TimeDelta::milliseconds(500 * i as i64),
                    lat,
                    lon,
                    speed_kmh: (speed_kmh * 100.0).round() / 100.0,
                    heart_rate_bpm: Some(f64::from(rng.random_range(110..190u32))),
                    satellites: Some(rng.random_range(6..13)),
                    hdop: Some(f64::from(rng.random_range(5..20u32)) / 10.0),
                };
                if chance(rng, spec.implausible_fraction) {
                    match rng.random_range(0..3) {
                        0 => s.speed_kmh = 55.0,
                        1 => s.satellites = Some(2),
                        _ => s.hdop = Some(9.5),
                    }
                }
                s
            })
            .collect();
        GpsSession {
            player: player.clone(),
            date,
            session: "s1".into(),
            samples,
        }
    }

    pub fn zones(&self) -> ZoneConfig {
        ZoneConfig {
            max_hr_bpm: self.max_hr_bpm.clone(),
            ..Default::default()
        }
    }

    pub fn tables(&self) -> RawTables {
        RawTables {
            subjective: self.subjective.clone(),
            matches: self.matches.clone(),
            injury_rows: self.injury_rows.clone(),
            roster: self.roster.clone(),
        }
    }

    pub fn options(&self) -> PreprocessOptions {
        PreprocessOptions {
            zones: self.zones(),
            match_attributes: self.match_attributes.clone(),
            ..Default::default()
        }
    }

    /// Runs the in-memory preprocessing pipeline on the fixture.
    pub fn store(&self, opts: &PreprocessOptions) -> Result<(FeatureStore, PreprocessReport), StoreError> {
        preprocess(self.sessions.iter().cloned().map(Ok), &self.tables(), opts)
    }

    /// Writes the raw layout: `gps/`, `subjective/`, `matches.csv`,
    /// `injuries.csv` and `roster.json`.
    pub fn write(&self, dir: &Path) -> Result<(), IngestError> {
        let io = |path: PathBuf| move |source| IngestError::Io { path, source };
        let gps = dir.join(GPS_DIR);
        let subj = dir.join(SUBJECTIVE_DIR);
        fs::create_dir_all(&gps).map_err(io(gps.clone()))?;
        fs::create_dir_all(&subj).map_err(io(subj.clone()))?;
        for s in &self.sessions {
            write_gps_session(&gps, s)?;
        }
        write_subjective(&self.subjective, &subj)?;
        write_match_stats(&dir.join(MATCHES_FILE), &self.match_attributes, &self.matches)?;
        write_injury_reports(&dir.join(INJURIES_FILE), &self.injury_rows)?;
        let roster = dir.join(ROSTER_FILE);
        let json = serde_json::to_string_pretty(&self.roster).expect("roster serializes");
        fs::write(&roster, json).map_err(io(roster.clone()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{read_gps, read_injury_reports, read_match_stats, read_subjective};

    #[test]
    fn sizes_and_determinism() {
        let spec = FixtureSpec::default();
        let a = RawFixture::generate(&spec);
        assert_eq!(a.sessions.len(), 400);
        assert_eq!(a.planted.len(), 12);
        assert_eq!(a.roster.len(), 8);
        assert_eq!(a, RawFixture::generate(&spec));
    }

    #[test]
    fn preprocess_links_every_planted_injury() {
        let f = RawFixture::generate(&FixtureSpec::default());
        let (store, report) = f.store(&f.options()).unwrap();
        assert_eq!(report.injuries_linked, 12);
        assert!(report.unmatched_injuries.is_empty());
        assert_eq!(store.records.len(), 400);
        assert_eq!(store.missing_count(), 0);
        let mut got = store.injury_events();
        got.sort();
        let mut want = f.planted.clone();
        want.sort();
        assert_eq!(got, want);
        assert!(report.retention.retention() < 1.0 && report.retention.retention() > 0.9);
    }

    #[test]
    fn written_layout_reads_back() {
        let spec = FixtureSpec {
            players: 2,
            sessions: 12,
            injuries: 2,
            ..Default::default()
        };
        let f = RawFixture::generate(&spec);
        let tmp = tempfile::tempdir().unwrap();
        f.write(tmp.path()).unwrap();
        let sessions: Vec<GpsSession> = read_gps(&tmp.path().join(GPS_DIR))
            .unwrap()
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(sessions.len(), 12);
        let mut subj = read_subjective(&tmp.path().join(SUBJECTIVE_DIR)).unwrap();
        subj.sort_by(|a, b| (&a.player, a.date).cmp(&(&b.player, b.date)));
        let mut want = f.subjective.clone();
        want.sort_by(|a, b| (&a.player, a.date).cmp(&(&b.player, b.date)));
        assert_eq!(subj, want);
        assert_eq!(read_injury_reports(&tmp.path().join(INJURIES_FILE)).unwrap(), f.injury_rows);
        assert_eq!(
            read_match_stats(&tmp.path().join(MATCHES_FILE), &f.match_attributes).unwrap().len(),
            f.matches.len()
        );
    }
}
