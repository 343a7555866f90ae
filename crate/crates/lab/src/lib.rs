//! Experiment runner for `homog-core`: configuration files, field files,
//! the parallel sample runner, result emission and the `homog` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod hgf;
pub mod output;
pub mod report;
pub mod runner;

pub use error::{LabError, Result};
