//! `rwiou`: metric evaluation, gradient audits, assignment inspection and
//! fitting experiments.
//!
//! Exit codes: 0 success, 1 failed check or experiment, 2 usage error.

mod assign;
mod fit;
mod gradcheck;
mod iou;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input.
    #[error("{0}")]
    Usage(String),
    /// The command ran but its check or experiment did not pass.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<rwiou_core::Error> for CliError {
    fn from(e: rwiou_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Prints a line to stdout. A closed pipe (e.g. `| head`) is not an error.
pub fn emit(text: &str) -> CliResult {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(CliError::Usage(format!("cannot write output: {e}")))
        }
        _ => Ok(()),
    }
}

pub fn parse_alpha(s: &str) -> Result<rwiou_core::Alpha, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    rwiou_core::Alpha::new(v).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "rwiou", version, about = "Rotation-weighted IoU and dynamic cross label assignment toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Overlap of two boxes given as x,y,z,l,w,h,theta.
    Iou(iou::IouArgs),
    /// Finite-difference and bound audits of the analytic gradient (JSON).
    Gradcheck(gradcheck::GradcheckArgs),
    /// Label assignment for a scene file (JSON).
    Assign(assign::AssignArgs),
    /// Fit experiments from a config file; writes CSV trajectories and a report.
    Fit(fit::FitArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Iou(a) => iou::run(&a),
        Command::Gradcheck(a) => gradcheck::run(&a),
        Command::Assign(a) => assign::run(&a),
        Command::Fit(a) => fit::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
