//! Command-line front end for `gridrouter`: JSON scenarios, trace CSVs,
//! stability reports and parameter sweeps.

pub mod commands;
pub mod error;
pub mod report;
pub mod scenario_file;

pub use error::{CliError, Result};
