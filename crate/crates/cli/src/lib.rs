//! Command-line front end: config parsing, run manifests, subcommands and
//! SVG output.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod svg;

pub use commands::{execute, produce, replay};
pub use config::ConfigFile;
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
