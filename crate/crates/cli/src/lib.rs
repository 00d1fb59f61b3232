//! Library half of the `asyougo` command-line tool: configuration, the
//! experiment and solver subcommands, and the field advisor.

pub mod advisor;
pub mod commands;
pub mod config;
