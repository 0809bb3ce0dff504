//! Batch front-end for the `omicsfuse` pipeline: CSV ingestion, flat
//! configuration files, and JSON/CSV report emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "OMICSFUSE_OUT";
/// Output directory used when neither `--out` nor [`OUT_DIR_ENV`] is set.
pub const DEFAULT_OUT_DIR: &str = "omicsfuse_out";
