use serde::{Deserialize, Serialize};

use super::{fuse, impute, FeatureCatalog, FeatureStore, FuseInputs, ImputeMethod, ImputeReport, StoreError};
use crate::features::{aggregate_session, downsample_1hz, LoadModel, ZoneConfig};
use crate::ingest::{
    default_match_attributes, filter_plausible, link_injuries, GpsSession, IngestError, MatchStats,
    PlausibilityConfig, RawInjuryRow, RetentionStats, RosterEntry, SubjectiveReport, UnmatchedInjury,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessOptions {
    pub plausibility: PlausibilityConfig,
    pub zones: ZoneConfig,
    pub load_model: LoadModel,
    /// `None` leaves gaps in the store.
    pub impute: Option<ImputeMethod>,
    pub match_attributes: Vec<String>,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            plausibility: PlausibilityConfig::default(),
            zones: ZoneConfig::default(),
            load_model: LoadModel::default(),
            impute: Some(ImputeMethod::Median),
            match_attributes: default_match_attributes(),
        }
    }
}

/// Non-GPS raw inputs, already parsed.
#[derive(Debug, Clone, Default)]
pub struct RawTables {
    pub subjective: Vec<SubjectiveReport>,
    pub matches: Vec<MatchStats>,
    pub injury_rows: Vec<RawInjuryRow>,
    pub roster: Vec<RosterEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub retention: RetentionStats,
    pub sessions: usize,
    /// Sessions with no sample left after filtering.
    pub empty_sessions: usize,
    pub records: usize,
    pub injuries_linked: usize,
    pub unmatched_injuries: Vec<UnmatchedInjury>,
    pub off_session_injuries: usize,
    pub imputation: Option<ImputeReport>,
}

/// Filters, downsamples and aggregates each GPS session as it streams in,
/// links injury reports to the roster, fuses everything and optionally
/// imputes gaps.
pub fn preprocess<I>(gps: I, tables: &RawTables, opts: &PreprocessOptions) -> Result<(FeatureStore, PreprocessReport), StoreError>
where
    I: IntoIterator<Item = Result<GpsSession, IngestError>>,
{
    let catalog = FeatureCatalog::standard(&opts.match_attributes)?;
    let mut retention = RetentionStats::default();
    let mut sessions = Vec::new();
    let mut empty_sessions = 0;
    let mut seen = 0;
    for session in gps {
        let session = session?;
        seen += 1;
        let (mut kept, stats) = filter_plausible(session.samples, &opts.plausibility);
        retention = retention.merge(&stats);
        if kept.is_empty() {
            empty_sessions += 1;
            continue;
        }
        kept.sort_by_key(|s| s.timestamp);
        let per_second = downsample_1hz(&kept);
        sessions.push(aggregate_session(&session.player, session.date, &per_second, &opts.zones));
    }
    let linkage = link_injuries(&tables.injury_rows, &tables.roster);
    for u in &linkage.unmatched {
        log::warn!("injury report for {:?} on {} left unmatched ({:?})", u.row.name, u.row.date, u.reason);
    }
    let inputs = FuseInputs {
        subjective: tables.subjective.clone(),
        sessions,
        matches: tables.matches.clone(),
        match_attributes: opts.match_attributes.clone(),
        injuries: linkage.events.clone(),
    };
    let fused = fuse(&inputs, &catalog, opts.load_model);
    let (store, imputation) = match opts.impute {
        Some(method) => {
            let (s, r) = impute(&fused, method);
            (s, Some(r))
        }
        None => (fused, None),
    };
    let report = PreprocessReport {
        retention,
        sessions: seen,
        empty_sessions,
        records: store.records.len(),
        injuries_linked: linkage.events.len(),
        unmatched_injuries: linkage.unmatched,
        off_session_injuries: store.off_session_injuries.len(),
        imputation,
    };
    Ok((store, report))
}
