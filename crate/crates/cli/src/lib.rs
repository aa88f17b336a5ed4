//! Command-line front end: argument definitions, subcommand implementations
//! and the exit-code contract.

pub mod args;
pub mod commands;
pub mod failure;

pub use args::Cli;
pub use commands::run;
pub use failure::Failure;
