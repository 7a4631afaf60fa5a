//! Command-line front end for simplified symbolic analysis.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod pipeline;

pub use config::RunConfig;
pub use pipeline::{Expression, RunReport};
