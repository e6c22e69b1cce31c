//! Command-line front end: run configuration, the verification suite, plot-data emission
//! and the subcommand implementations.
pub mod commands;
pub mod config;
pub mod figures;
pub mod suite;
