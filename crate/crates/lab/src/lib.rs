//! Experiment driver for convolutional arithmetic circuits: seeded model
//! generation, entropy profiles, scaling-law verification, the activation
//! study and ensemble sweeps. Every run writes CSV/JSON artifacts plus a
//! manifest with their SHA-256 digests.

pub mod config;
pub mod error;
pub mod format;
pub mod manifest;
pub mod report;
pub mod runner;

pub use config::{Command, ExperimentConfig, Overrides};
pub use error::{LabError, LabResult};
pub use manifest::RunManifest;
pub use runner::run;
