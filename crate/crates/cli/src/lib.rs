//! Files, configuration, parallel surveys and the command line for the
//! open-qubit control landscape toolkit. The numerics live in
//! [`qlandscape_core`].

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod runner;
pub mod svg;

pub use crate::config::RunConfig;
pub use crate::error::{CliError, ExitCode};
pub use crate::runner::{run_cross_objective, run_survey_parallel};
