//! Library half of the `pmds` command-line tool: configuration, shard files
//! and the subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod shard;

pub use commands::{run, Cli};
pub use error::CliError;
