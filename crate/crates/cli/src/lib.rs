//! File formats, synthetic sequences and the `gravview` pipeline.

pub mod cli;
pub mod commands;
pub mod error;
pub mod formats;
pub mod synth;

pub use error::CliError;
