//! Experiment plumbing around `streambag`: run specifications, offline and loopback runs,
//! the load generator front end, the resumable grid runner and the report tables.

pub mod config;
pub mod dataset;
pub mod generate;
pub mod grid;
pub mod report;
pub mod results;
pub mod run;

pub use config::{RunSpec, UsageError};
pub use dataset::DatasetSource;
