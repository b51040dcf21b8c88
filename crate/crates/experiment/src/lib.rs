//! Batch experiments relating factor-graph redundancy to SLAM accuracy.
//!
//! [`run_experiment`] simulates many landmark worlds, estimates the
//! redundancy of the two landmark sources in each, and scores the
//! single-landmark estimates against ground truth. [`correlation_report`]
//! summarizes a batch with rank correlations and [`output`] writes the
//! records, summary and scatter plots.

pub mod config;
pub mod error;
pub mod oracle;
pub mod output;
pub mod report;
pub mod runner;
pub mod stats;

pub use config::ExperimentConfig;
pub use error::{ExperimentError, Result};
pub use report::{correlation_report, Summary};
pub use runner::{run_experiment, run_simulation, SimRecord};
