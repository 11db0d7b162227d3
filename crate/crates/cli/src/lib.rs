//! Reproducible experiment runner: JSON configuration in, versioned JSON
//! and CSV reports out.

pub mod catalog;
pub mod config;
pub mod report;
pub mod run;

pub use catalog::{list_experiments, ExperimentInfo};
pub use config::ExperimentConfig;
pub use report::{OutputFormat, Report, Row, Table, Verdict};
pub use run::{run, Overrides};
