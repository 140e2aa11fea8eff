//! Command-line pipeline around `sentidyn`: configuration, checkpoints,
//! artifact tables and the subcommands that produce them.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod svg;
pub mod tables;

pub use checkpoint::Checkpoint;
pub use config::PipelineConfig;
pub use error::{CliError, Result};
