//! Batch front end: reads a problem configuration, runs one command and
//! emits JSON reports, CSV grids or SVG plots.

pub mod commands;
pub mod config;
pub mod gridcsv;
pub mod plot;
pub mod verify;

use thiserror::Error;

pub use commands::{execute, run_command, Artifact, Command, Flags};
pub use config::{Problem, ProblemConfig};

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed configuration or arguments.
    #[error("{0}")]
    Input(String),
    /// A computation on valid input could not be carried out.
    #[error("{0}")]
    Compute(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
