//! Per-session GPS aggregates and per-day training-load metrics.

mod geo;
mod loads;

pub use geo::{aggregate_session, downsample_1hz, haversine_m, SessionAggregate, ZoneConfig, EARTH_RADIUS_M};
pub use loads::{derive_loads, srpe, LoadModel, TrainingLoadFeatures, EPSILON};
