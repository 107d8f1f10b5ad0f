//! Command-line orchestration for the decoupling lab: config resolution,
//! subcommand dispatch and report rendering.

pub mod config;
pub mod run;

pub use config::{resolve, Command, ExperimentConfig, Format, Formula, Options};
pub use run::{emit_plot_data, execute, AtlasRow, Envelope, Output};
