//! Config-driven experiment runner for the romkit reduced-order models.
//!
//! - [`config`]: TOML run configuration, defaults and validation;
//! - [`io`]: `ROMSNAP1` snapshot binaries and CSV tables;
//! - [`commands`]: full-model runs, decay reports, static and adaptive ROM runs
//!   and run comparison.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use error::CliError;
