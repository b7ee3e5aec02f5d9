use std::path::PathBuf;

use clap::Args;
use rwiou_core::assign::{assign_dcla, AssignConfig, GridSpec, GroundTruth, PredictionMap};
use rwiou_core::harness::{synthetic_predictions, InitKind};
use rwiou_core::{Alpha, BoxParams8};
use serde::Deserialize;

use crate::{emit, parse_alpha, CliError, CliResult};

#[derive(Debug, Args)]
pub struct AssignArgs {
    /// Scene file (JSON)
    pub scene: PathBuf,
    /// Cross-region radius (Manhattan distance)
    #[arg(long)]
    pub r: Option<usize>,
    /// Rotation weight strength in [0, 1]
    #[arg(long, value_parser = parse_alpha)]
    pub alpha: Option<Alpha>,
}

/// Explicit per-cell predictions, cell-major in row-major cell order.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionFile {
    pub boxes: Vec<BoxParams8>,
    pub scores: Vec<f64>,
    #[serde(default)]
    pub iou_conf: Option<Vec<f64>>,
}

/// Scene file for `assign`. Without `predictions`, a prediction map is
/// synthesized from the objects with `init` and `seed`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub grid: GridSpec,
    pub n_classes: usize,
    #[serde(default)]
    pub gts: Vec<GroundTruth>,
    #[serde(default)]
    pub predictions: Option<PredictionFile>,
    #[serde(default)]
    pub init: InitKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub assign: AssignConfig,
}

impl SceneFile {
    pub fn load(path: &PathBuf) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let scene: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid scene file {}: {e}", path.display())))?;
        scene.grid.validate()?;
        for (i, g) in scene.gts.iter().enumerate() {
            g.bbox
                .validate()
                .map_err(|e| CliError::Usage(format!("gts[{i}]: {e}")))?;
            if g.class_id >= scene.n_classes {
                return Err(CliError::Usage(format!(
                    "gts[{i}]: class_id {} out of range for {} classes",
                    g.class_id, scene.n_classes
                )));
            }
        }
        Ok(scene)
    }

    pub fn prediction_map(&self, r: usize) -> CliResult<PredictionMap> {
        Ok(match &self.predictions {
            Some(p) => PredictionMap::new(
                self.grid,
                self.n_classes,
                p.boxes.clone(),
                p.scores.clone(),
                p.iou_conf.clone().unwrap_or_else(|| vec![0.0; p.boxes.len()]),
            )?,
            None => synthetic_predictions(
                &self.grid,
                &self.gts,
                self.n_classes,
                self.init,
                r.max(1),
                self.seed,
            )?,
        })
    }
}

pub fn run(a: &AssignArgs) -> CliResult {
    let scene = SceneFile::load(&a.scene)?;
    let mut cfg = scene.assign;
    if let Some(r) = a.r {
        cfg.r = r;
    }
    if let Some(alpha) = a.alpha {
        cfg.alpha = alpha;
    }
    let preds = scene.prediction_map(cfg.r)?;
    let result = assign_dcla(&scene.grid, &scene.gts, &preds, &cfg)?;
    let json = serde_json::to_string_pretty(&result.dump())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    emit(&json)
}
