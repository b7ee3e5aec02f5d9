use serde::{Deserialize, Serialize};

use super::grid::{CellIndex, GridSpec};
use crate::error::{Error, Result};
use crate::geometry::{Box3D, BoxParams8};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    #[serde(rename = "box")]
    pub bbox: Box3D,
    pub class_id: usize,
}

impl GroundTruth {
    pub fn new(bbox: Box3D, class_id: usize) -> Self {
        Self { bbox, class_id }
    }
}

/// Dense per-cell network outputs: one class-agnostic box, one score per
/// class and one IoU-confidence value per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMap {
    grid: GridSpec,
    n_classes: usize,
    boxes: Vec<BoxParams8>,
    /// Cell-major: `scores[cell * n_classes + class]`.
    scores: Vec<f64>,
    iou_conf: Vec<f64>,
}

impl PredictionMap {
    pub fn new(
        grid: GridSpec,
        n_classes: usize,
        boxes: Vec<BoxParams8>,
        scores: Vec<f64>,
        iou_conf: Vec<f64>,
    ) -> Result<Self> {
        grid.validate()?;
        let n = grid.n_cells();
        if n_classes == 0 {
            return Err(Error::InvalidConfig("need at least one class".into()));
        }
        if boxes.len() != n || scores.len() != n * n_classes || iou_conf.len() != n {
            return Err(Error::InvalidConfig(format!(
                "prediction map sizes ({} boxes, {} scores, {} iou) do not match a {}x{} grid with {} classes",
                boxes.len(),
                scores.len(),
                iou_conf.len(),
                grid.n_rows,
                grid.n_cols,
                n_classes
            )));
        }
        for b in &boxes {
            b.validate()?;
        }
        if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::InvalidConfig(format!("score {s} outside [0, 1]")));
        }
        if let Some(c) = iou_conf.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite IoU confidence {c}")));
        }
        Ok(Self {
            grid,
            n_classes,
            boxes,
            scores,
            iou_conf,
        })
    }

    /// Every cell predicts `bbox` with score `score` on all classes.
    pub fn uniform(grid: GridSpec, n_classes: usize, bbox: BoxParams8, score: f64) -> Result<Self> {
        let n = grid.n_cells();
        Self::new(grid, n_classes, vec![bbox; n], vec![score; n * n_classes], vec![0.0; n])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn boxes(&self) -> &[BoxParams8] {
        &self.boxes
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn iou_conf(&self) -> &[f64] {
        &self.iou_conf
    }

    pub fn box_at(&self, cell: CellIndex) -> &BoxParams8 {
        &self.boxes[self.grid.linear(cell)]
    }

    pub fn score(&self, cell: CellIndex, class_id: usize) -> f64 {
        self.scores[self.grid.linear(cell) * self.n_classes + class_id]
    }

    pub fn conf(&self, cell: CellIndex) -> f64 {
        self.iou_conf[self.grid.linear(cell)]
    }

    pub fn set_box(&mut self, cell: CellIndex, b: BoxParams8) -> Result<()> {
        b.validate()?;
        let i = self.grid.linear(cell);
        self.boxes[i] = b;
        Ok(())
    }

    pub fn set_score(&mut self, cell: CellIndex, class_id: usize, score: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidConfig(format!("score {score} outside [0, 1]")));
        }
        let i = self.grid.linear(cell) * self.n_classes + class_id;
        self.scores[i] = score;
        Ok(())
    }

    pub fn set_conf(&mut self, cell: CellIndex, conf: f64) {
        let i = self.grid.linear(cell);
        self.iou_conf[i] = conf;
    }
}
