//! Experiment orchestration, file formats and the command-line front end for
//! [`boussinesq_core`].

pub mod checks;
pub mod config;
mod error;
pub mod experiment;
pub mod report;
pub mod stability;

pub use config::{ExperimentConfig, ExperimentId, VariantName};
pub use error::{HarnessError, Result};
pub use experiment::{add_noise, run_experiment, run_experiment_with, synthesize_measurements, ReconstructionReport, Stage};
pub use report::{read_summary, write_report, ReportSummary};
