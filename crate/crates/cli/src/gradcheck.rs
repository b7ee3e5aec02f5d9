use clap::Args;
use rwiou_core::grad::{
    finite_difference_audit, gradient_bound_audit, AuditReport, RegimeReport, Violation,
    MIN_AUDIT_SAMPLES,
};
use rwiou_core::Alpha;
use serde::Serialize;

use crate::{emit, parse_alpha, CliError, CliResult};

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Random pairs per audit (at least 100)
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(100..))]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rotation weight strength in [0, 1]
    #[arg(long, default_value = "0.5", value_parser = parse_alpha)]
    pub alpha: Alpha,
}

#[derive(Debug, Serialize)]
struct GradcheckReport {
    alpha: f64,
    seed: u64,
    samples: usize,
    passed: bool,
    finite_difference: RegimeReport,
    fd_violations: Vec<Violation>,
    bounds: AuditReport,
}

pub fn run(a: &GradcheckArgs) -> CliResult {
    let samples = a.samples as usize;
    let (fd, fd_violations) = finite_difference_audit(samples, a.seed, a.alpha);
    // the bound regimes need a minimum population to be meaningful
    let bounds = gradient_bound_audit(samples.max(MIN_AUDIT_SAMPLES), a.seed, a.alpha)?;
    let report = GradcheckReport {
        alpha: a.alpha.get(),
        seed: a.seed,
        samples,
        passed: fd.passed() && bounds.passed,
        finite_difference: fd,
        fd_violations,
        bounds,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Usage(e.to_string()))?;
    emit(&json)?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Failed("gradient audit failed".into()))
    }
}
