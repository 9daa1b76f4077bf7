//! File formats, manifests and the `uip` command-line stages built on `uip-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
