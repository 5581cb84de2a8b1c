//! Experiment driver for the coded distributed FFT simulator: config files,
//! fault files, the reference FFT and CSV output.

pub mod commands;
pub mod config;
pub mod oracle;

use std::fs;
use std::path::Path;

use anyhow::Context;
use codedfft::FaultScenario;

pub use commands::{cmd_bounds, cmd_run, cmd_sweep, write_bounds_csv, write_csv, CsvRow, RunStatus, CSV_HEADER};
pub use config::{ConfigError, ExperimentConfig};

pub fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    Ok(ExperimentConfig::parse(&text)?)
}

pub fn load_faults(path: &Path) -> anyhow::Result<FaultScenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading fault file {}", path.display()))?;
    text.parse().with_context(|| format!("parsing fault file {}", path.display()))
}
