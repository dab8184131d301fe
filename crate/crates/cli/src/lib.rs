//! Harness around `treekv-core`: weight files, run configs, JSON-lines decode
//! traces, and the commands behind the `treekv` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod trace;
pub mod weights_io;

pub use config::{ConfigArgs, RunConfig, TraceDetail};
pub use error::{CliError, Result};
