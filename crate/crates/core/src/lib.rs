pub mod bundle_models;
pub mod collapse_lab;
pub mod error;
pub mod lie_models;
pub mod linalg;
pub mod metric_lab;
pub mod orbit;
pub mod transport_engine;
