//! File formats, run configuration, parallel runners and the `dbpi` command
//! line on top of [`dbpi_core`].

pub mod commands;
pub mod config;
mod error;
pub mod io;
pub mod model;
pub mod report;
pub mod runner;

pub use error::{CliError, Result};
