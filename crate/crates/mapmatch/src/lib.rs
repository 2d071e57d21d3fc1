//! File formats, synthetic benchmark, evaluation and the commands behind
//! the `mapmatch` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod eval;
pub mod formats;
pub mod sim;

pub use error::{CliError, Result};
