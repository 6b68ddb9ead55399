//! Injury-risk modelling from GPS, wellness and match data: ingestion,
//! feature derivation, windowed samples, synthetic augmentation, classifiers
//! and evaluation.

pub mod evaluation;
pub mod features;
pub mod fixture;
pub mod ingest;
pub mod models;
pub mod rng;
pub mod scalar;
pub mod store;
pub mod synthesis;
pub mod windowing;

pub use scalar::Scalar;

pub type Dataset = models::Dataset<f64>;
pub type Model = models::TrainedModel<f64>;
pub type ModelF32 = models::TrainedModel<f32>;
pub type RocCurve = evaluation::RocCurve<f64>;
pub type LoadFeatures = features::TrainingLoadFeatures<f64>;
