use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::ingest::SubjectiveField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    /// Training load
    TL,
    /// Wellness
    W,
    GPS,
    MATCH,
    /// Injury metadata; describes the target and is never a predictor.
    INJURY,
}

impl FeatureGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::TL => "TL",
            FeatureGroup::W => "W",
            FeatureGroup::GPS => "GPS",
            FeatureGroup::MATCH => "MATCH",
            FeatureGroup::INJURY => "INJURY",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub group: FeatureGroup,
    pub kind: FeatureKind,
}

/// Ordered feature list; defines the store column order between the key
/// columns (`player,date,session_type`) and the trailing `injury` target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureDef>", into = "Vec<FeatureDef>")]
pub struct FeatureCatalog {
    features: Vec<FeatureDef>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

pub const KEY_COLUMNS: [&str; 3] = ["player", "date", "session_type"];
pub const TARGET_COLUMN: &str = "injury";

const TL_DERIVED: [&str; 9] = [
    "srpe",
    "daily_load",
    "weekly_load",
    "atl",
    "ctl28",
    "ctl42",
    "monotony",
    "strain",
    "acwr",
];

const GPS_SCALARS: [&str; 4] = ["duration_s", "total_distance_m", "speed_max_ms", "speed_mean_ms"];

pub const INJURY_METADATA: [&str; 4] = [
    "injury_cause",
    "injury_activity",
    "injury_area",
    "injury_body_region",
];

impl FeatureCatalog {
    pub fn new(features: Vec<FeatureDef>) -> Result<Self, StoreError> {
        let mut index = HashMap::new();
        for (i, f) in features.iter().enumerate() {
            let reserved = KEY_COLUMNS.contains(&f.name.as_str()) || f.name == TARGET_COLUMN;
            if reserved || index.insert(f.name.clone(), i).is_some() {
                return Err(StoreError::DuplicateFeature(f.name.clone()));
            }
        }
        Ok(FeatureCatalog { features, index })
    }

    /// Training-load, wellness, GPS, the given match attributes, then injury
    /// metadata.
    pub fn standard(match_attributes: &[String]) -> Result<Self, StoreError> {
        let def = |name: &str, group, kind| FeatureDef {
            name: name.to_string(),
            group,
            kind,
        };
        let num = |name: &str, group| def(name, group, FeatureKind::Numeric);
        let mut f = Vec::new();
        f.push(num("rpe", FeatureGroup::TL));
        f.push(num("duration_min", FeatureGroup::TL));
        f.extend(TL_DERIVED.iter().map(|n| num(n, FeatureGroup::TL)));
        f.extend(
            SubjectiveField::ALL[2..]
                .iter()
                .map(|s| num(s.name(), FeatureGroup::W)),
        );
        f.extend(GPS_SCALARS.iter().map(|n| num(n, FeatureGroup::GPS)));
        for z in 1..=5 {
            f.push(num(&format!("speed_zone_{z}_s"), FeatureGroup::GPS));
        }
        for z in 1..=5 {
            f.push(num(&format!("hr_zone_{z}_s"), FeatureGroup::GPS));
        }
        f.push(num("sample_count", FeatureGroup::GPS));
        f.extend(match_attributes.iter().map(|n| num(n, FeatureGroup::MATCH)));
        f.extend(
            INJURY_METADATA
                .iter()
                .map(|n| def(n, FeatureGroup::INJURY, FeatureKind::Categorical)),
        );
        Self::new(f)
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&FeatureDef> {
        self.index_of(name).map(|i| &self.features[i])
    }

    /// Full store header, keys and target included.
    pub fn columns(&self) -> Vec<String> {
        KEY_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain(self.features.iter().map(|f| f.name.clone()))
            .chain(std::iter::once(TARGET_COLUMN.to_string()))
            .collect()
    }

    /// Numeric features belonging to any of `groups`, in catalog order.
    pub fn numeric_in(&self, groups: &[FeatureGroup]) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind == FeatureKind::Numeric && groups.contains(&f.group))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn match_attributes(&self) -> Vec<String> {
        self.features
            .iter()
            .filter(|f| f.group == FeatureGroup::MATCH)
            .map(|f| f.name.clone())
            .collect()
    }
}

impl TryFrom<Vec<FeatureDef>> for FeatureCatalog {
    type Error = StoreError;

    fn try_from(features: Vec<FeatureDef>) -> Result<Self, StoreError> {
        FeatureCatalog::new(features)
    }
}

impl From<FeatureCatalog> for Vec<FeatureDef> {
    fn from(c: FeatureCatalog) -> Self {
        c.features
    }
}
