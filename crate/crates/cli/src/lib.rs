//! Config-driven experiment front end for REGNN power allocation.
//!
//! The binary in `main.rs` is a thin clap wrapper over [`commands`]; tests
//! and the acceptance target call the same functions directly.

pub mod commands;
pub mod config;
pub mod csv;
pub mod error;
pub mod oracle;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
