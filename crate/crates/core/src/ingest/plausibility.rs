//! Signal-quality and geographic plausibility filtering of GPS samples.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GpsSample;

/// Bounds applied by [`filter_plausible`]. `None` disables a quality rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlausibilityConfig {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub speed_max_kmh: f64,
    pub min_satellites: Option<u32>,
    pub max_hdop: Option<f64>,
}

impl Default for PlausibilityConfig {
    fn default() -> Self {
        PlausibilityConfig {
            lat_min: -90.0,
            lat_max: 90.0,
            lon_min: -180.0,
            lon_max: 180.0,
            speed_max_kmh: 40.0,
            min_satellites: Some(4),
            max_hdop: Some(5.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlausibilityRule {
    LatRange,
    LonRange,
    Speed,
    Satellites,
    Hdop,
}

impl PlausibilityRule {
    pub fn name(self) -> &'static str {
        match self {
            PlausibilityRule::LatRange => "lat_range",
            PlausibilityRule::LonRange => "lon_range",
            PlausibilityRule::Speed => "speed",
            PlausibilityRule::Satellites => "satellites",
            PlausibilityRule::Hdop => "hdop",
        }
    }
}

impl PlausibilityConfig {
    /// Every rule the sample violates. Missing optional quality fields pass.
    pub fn violations(&self, s: &GpsSample) -> Vec<PlausibilityRule> {
        let mut out = Vec::new();
        if !(self.lat_min..=self.lat_max).contains(&s.lat) {
            out.push(PlausibilityRule::LatRange);
        }
        if !(self.lon_min..=self.lon_max).contains(&s.lon) {
            out.push(PlausibilityRule::LonRange);
        }
        if !(0.0..=self.speed_max_kmh).contains(&s.speed_kmh) {
            out.push(PlausibilityRule::Speed);
        }
        if let (Some(min), Some(n)) = (self.min_satellites, s.satellites) {
            if n < min {
                out.push(PlausibilityRule::Satellites);
            }
        }
        if let (Some(max), Some(h)) = (self.max_hdop, s.hdop) {
            if !(0.0..=max).contains(&h) {
                out.push(PlausibilityRule::Hdop);
            }
        }
        out
    }
}

/// Kept/total counts plus per-rule violation counts. A sample violating two
/// rules adds one to each rule but only one to `dropped`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetentionStats {
    pub total: u64,
    pub kept: u64,
    pub drops: BTreeMap<PlausibilityRule, u64>,
}

impl RetentionStats {
    pub fn dropped(&self) -> u64 {
        self.total - self.kept
    }

    /// kept / total; 1.0 for empty input (see [`RetentionStats::is_empty`]).
    pub fn retention(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.kept as f64 / self.total as f64
        }
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Associative, commutative combination of partial results.
    pub fn merge(mut self, other: &RetentionStats) -> RetentionStats {
        self.total += other.total;
        self.kept += other.kept;
        for (rule, n) in &other.drops {
            *self.drops.entry(*rule).or_default() += n;
        }
        self
    }
}

/// Streaming filter that records retention as it goes.
pub struct PlausibilityFilter<'a, I> {
    inner: I,
    cfg: &'a PlausibilityConfig,
    stats: RetentionStats,
}

impl<'a, I: Iterator<Item = GpsSample>> PlausibilityFilter<'a, I> {
    pub fn new(inner: I, cfg: &'a PlausibilityConfig) -> Self {
        PlausibilityFilter {
            inner,
            cfg,
            stats: RetentionStats::default(),
        }
    }

    pub fn stats(&self) -> &RetentionStats {
        &self.stats
    }

    pub fn into_stats(self) -> RetentionStats {
        self.stats
    }
}

impl<I: Iterator<Item = GpsSample>> Iterator for PlausibilityFilter<'_, I> {
    type Item = GpsSample;

    fn next(&mut self) -> Option<GpsSample> {
        for sample in self.inner.by_ref() {
            self.stats.total += 1;
            let violations = self.cfg.violations(&sample);
            if violations.is_empty() {
                self.stats.kept += 1;
                return Some(sample);
            }
            for rule in violations {
                *self.stats.drops.entry(rule).or_default() += 1;
            }
        }
        None
    }
}

/// Collecting form of [`PlausibilityFilter`].
pub fn filter_plausible<I>(samples: I, cfg: &PlausibilityConfig) -> (Vec<GpsSample>, RetentionStats)
where
    I: IntoIterator<Item = GpsSample>,
{
    let mut filter = PlausibilityFilter::new(samples.into_iter(), cfg);
    let kept: Vec<GpsSample> = filter.by_ref().collect();
    (kept, filter.into_stats())
}
