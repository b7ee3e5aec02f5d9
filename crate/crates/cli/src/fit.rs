use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use rwiou_core::harness::{mean_final_iou, ExperimentReport, FitConfig};
use serde::Serialize;

use crate::{emit, CliError, CliResult};

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Experiment config (JSON)
    pub config: PathBuf,
    /// Overrides `output_dir` from the config
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

const DEFAULT_OUTPUT_DIR: &str = "out";

#[derive(Serialize)]
struct TrajectoryRow {
    step: usize,
    l_cls: f64,
    l_reg: f64,
    l_iou: f64,
    total: f64,
    mean_true_iou: f64,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    config: &'a FitConfig,
    mean_final_iou: f64,
    min_final_iou: f64,
    passed: bool,
    runs: &'a [ExperimentReport],
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

fn write_trajectory(path: &Path, report: &ExperimentReport) -> CliResult {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for s in &report.steps {
        w.serialize(TrajectoryRow {
            step: s.step,
            l_cls: s.l_cls,
            l_reg: s.l_reg,
            l_iou: s.l_iou,
            total: s.total,
            mean_true_iou: s.mean_true_iou,
        })
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn run(a: &FitArgs) -> CliResult {
    let text = fs::read_to_string(&a.config).map_err(|e| io_err(&a.config, e))?;
    let cfg: FitConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", a.config.display())))?;
    let out_dir = a
        .output_dir
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));

    let reports = cfg.run()?;
    fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, e))?;
    for r in &reports {
        write_trajectory(&out_dir.join(format!("trajectory_seed{}.csv", r.seed)), r)?;
    }

    let mean = mean_final_iou(&reports);
    let min = reports.iter().map(|r| r.final_min_iou).fold(f64::INFINITY, f64::min);
    let diverged: Vec<&ExperimentReport> = reports.iter().filter(|r| r.diverged.is_some()).collect();
    let below = cfg.min_mean_iou.is_some_and(|t| mean < t);
    let passed = diverged.is_empty() && !below;
    let output = FitOutput {
        config: &cfg,
        mean_final_iou: mean,
        min_final_iou: min,
        passed,
        runs: &reports,
    };
    let report_path = out_dir.join("report.json");
    let json = serde_json::to_string_pretty(&output).map_err(|e| io_err(&report_path, e))?;
    fs::write(&report_path, json + "\n").map_err(|e| io_err(&report_path, e))?;

    let final_loss = reports.iter().map(ExperimentReport::final_loss).fold(0.0, f64::max);
    let threshold = cfg
        .min_mean_iou
        .map_or_else(|| "none".to_string(), |t| t.to_string());
    emit(&format!(
        "seeds={} mean_final_iou={mean:.6} min_final_iou={min:.6} max_final_loss={final_loss:.6} threshold={threshold} status={} output={}",
        reports.len(),
        if passed { "pass" } else { "fail" },
        out_dir.display()
    ))?;

    if let Some(d) = diverged.first() {
        let info = d.diverged.as_ref().unwrap();
        return Err(CliError::Failed(format!(
            "seed {} diverged at step {}: total {} (cls {}, reg {}, iou {})",
            d.seed, info.step, info.loss, info.l_cls, info.l_reg, info.l_iou
        )));
    }
    if below {
        return Err(CliError::Failed(format!(
            "mean final IoU {mean:.6} is below the threshold {threshold}"
        )));
    }
    Ok(())
}
