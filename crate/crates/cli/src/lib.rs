//! Experiment harness around `pbcn-reach`: run configs, presets, and the
//! artifact pipeline behind the `pbcn` binary.

pub mod config;
pub mod error;
pub mod harness;
pub mod presets;

pub use config::RunConfig;
pub use error::{CliError, Result};
