//! Library surface of the pipeline CLI, exposed so integration tests can
//! drive the subcommands in-process.

pub mod cohort;
pub mod commands;
pub mod config;
pub mod table;

pub use commands::{cmd_classify, cmd_connectivity, cmd_preprocess, cmd_report, cmd_synth, cmd_validate};
pub use config::RunConfig;
