//! Library side of the `anonymix` command: configuration, the end-to-end
//! pipeline and parameter sweeps.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod sweep;

pub use error::{CliError, Result};
