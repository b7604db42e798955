//! Library side of the `needlet` command: configuration, command bodies and
//! exit-code policy. `main.rs` only parses flags and routes output.

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::Path;

use clap::{Parser, Subcommand};
use needlet_core::NeedletError;
use thiserror::Error;

pub use commands::{execute, Outcome};
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] NeedletError),
    #[error("{0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 configuration, 3 numeric failure, 4 theorem hypothesis violated.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(NeedletError::Hypothesis(_)) => 4,
            CliError::Core(e) if e.is_config() => 2,
            CliError::Core(_) => 3,
            CliError::Config(_) | CliError::Io(_) | CliError::Json(_) => 2,
            CliError::Csv(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "needlet",
    version,
    about = "Mexican needlets on the sphere: kernels, correlations, simulation, frames"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate K_t(cos theta) for each scale
    Kernel(config::KernelConfig),
    /// Covariance and correlation of needlet coefficients, optionally with decay fits
    Correlation(config::CorrelationConfig),
    /// Monte-Carlo correlation from simulated fields against the analytic value
    Simulate(config::SimulateConfig),
    /// Run the numerical checks and emit a PASS/FAIL report
    Verify(config::VerifyConfig),
    /// Frame-bound estimates on band-limited subspaces
    Frame(config::FrameConfig),
    /// Replay a configuration saved from a JSON report (its "config" object) or written by hand
    Run {
        /// JSON file holding a run configuration
        config: std::path::PathBuf,
    },
}

impl Command {
    pub fn into_config(self) -> Result<RunConfig, CliError> {
        Ok(match self {
            Command::Kernel(c) => RunConfig::Kernel(c),
            Command::Correlation(c) => RunConfig::Correlation(c),
            Command::Simulate(c) => RunConfig::Simulate(c),
            Command::Verify(c) => RunConfig::Verify(c),
            Command::Frame(c) => RunConfig::Frame(c),
            Command::Run { config } => load_config(&config)?,
        })
    }
}

/// Accepts either a bare configuration or a report that embeds one under `config`.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let inner = match value.get("config") {
        Some(c) if c.get("command").is_some() => c.clone(),
        _ => value,
    };
    Ok(serde_json::from_value(inner)?)
}

/// Writes the outcome: with an output path the table (or the report when there
/// is no table) goes to the file and the report, if any, to `stdout`; without one
/// both go to `stdout`, table first.
pub fn emit(config: &RunConfig, outcome: &Outcome, stdout: &mut impl Write) -> Result<(), CliError> {
    match config.out() {
        Some(path) => {
            let (to_file, to_stdout) = match (&outcome.table, &outcome.report) {
                (Some(t), r) => (t, r.as_ref()),
                (None, Some(r)) => (r, None),
                (None, None) => return Ok(()),
            };
            std::fs::write(path, to_file)?;
            if let Some(r) = to_stdout {
                stdout.write_all(r.as_bytes())?;
            }
        }
        None => {
            for part in [&outcome.table, &outcome.report].into_iter().flatten() {
                stdout.write_all(part.as_bytes())?;
            }
        }
    }
    stdout.flush()?;
    Ok(())
}

/// Parses, runs and emits; returns the process exit code.
pub fn run_cli(cli: Cli, stdout: &mut impl Write, stderr: &mut impl Write) -> u8 {
    let result = cli.command.into_config().and_then(|config| {
        let outcome = execute(&config)?;
        emit(&config, &outcome, stdout)?;
        Ok(outcome.exit_code)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Core(NeedletError::Hypothesis("x".into())).exit_code(), 4);
        assert_eq!(CliError::Core(NeedletError::InvalidParameter("x".into())).exit_code(), 2);
        assert_eq!(CliError::Core(NeedletError::Degenerate("x".into())).exit_code(), 3);
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
    }

    #[test]
    fn flags_roundtrip_through_json() {
        let cli = Cli::try_parse_from([
            "needlet",
            "correlation",
            "--r",
            "2",
            "--alpha",
            "4",
            "--t",
            "0.4,0.2",
            "--cos-gamma",
            "-0.5,1",
            "--fit",
        ])
        .unwrap();
        let config = cli.command.into_config().unwrap();
        let text = serde_json::to_string(&config).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config);
        assert!(text.contains("\"command\":\"correlation\""));
    }
}
