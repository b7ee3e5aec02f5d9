//! Scene-level losses over a fixed assignment. Every mean is normalized by
//! the total positive count `N` (or `max(N, 1)` for the dense terms), and the
//! returned gradients already include that factor.

use serde::{Deserialize, Serialize};

use super::{quality_focal, smooth_l1};
use crate::assign::{AssignmentResult, CellIndex, GroundTruth, PredictionMap};
use crate::geometry::{rotated_iou_pred, Alpha, BoxParams8};
use crate::grad::{regression_loss_and_grad, Grad8};
use crate::reduce::pairwise_sum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtRegression {
    pub gt_index: usize,
    pub k: usize,
    /// Mean per-sample loss over this object's positives (0 when `k = 0`).
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionLoss {
    pub loss: f64,
    pub n_positives: usize,
    /// No positives at all; `loss` is then defined as 0.
    pub degenerate: bool,
    /// Gradient for each positive cell, scaled by `1 / N`.
    pub grads: Vec<(CellIndex, Grad8)>,
    pub per_gt: Vec<GtRegression>,
}

/// Mean over all (object, positive cell) pairs of a per-sample loss `f(pred,
/// target)` that also returns its gradient in `pred`.
pub fn regression_loss_scene_by<F>(
    assignment: &AssignmentResult,
    preds: &PredictionMap,
    gts: &[GroundTruth],
    f: F,
) -> RegressionLoss
where
    F: Fn(&BoxParams8, &BoxParams8) -> (f64, Grad8),
{
    let n = assignment.n_positives();
    let mut values = Vec::with_capacity(n);
    let mut grads = Vec::with_capacity(n);
    let mut per_gt = Vec::with_capacity(assignment.per_gt.len());
    for a in &assignment.per_gt {
        let target = gts[a.gt_index].bbox.to_params();
        let start = values.len();
        for cell in &a.positives {
            let (v, g) = f(preds.box_at(*cell), &target);
            values.push(v);
            grads.push((*cell, g));
        }
        let k = a.positives.len();
        per_gt.push(GtRegression {
            gt_index: a.gt_index,
            k,
            mean_loss: if k == 0 {
                0.0
            } else {
                pairwise_sum(&values[start..]) / k as f64
            },
        });
    }
    if n == 0 {
        return RegressionLoss {
            loss: 0.0,
            n_positives: 0,
            degenerate: true,
            grads: Vec::new(),
            per_gt,
        };
    }
    let inv_n = 1.0 / n as f64;
    RegressionLoss {
        loss: pairwise_sum(&values) / n as f64,
        n_positives: n,
        degenerate: false,
        grads: grads.into_iter().map(|(c, g)| (c, g * inv_n)).collect(),
        per_gt,
    }
}

/// Normalized regression loss with the per-sample `1 - RWIoU + (D/Diag)²`.
pub fn regression_loss_scene(
    assignment: &AssignmentResult,
    preds: &PredictionMap,
    gts: &[GroundTruth],
    alpha: Alpha,
) -> RegressionLoss {
    regression_loss_scene_by(assignment, preds, gts, |p, t| regression_loss_and_grad(p, t, alpha))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationLoss {
    pub loss: f64,
    /// `dL/dp` per cell and class, cell-major like the heatmap.
    pub grad: Vec<f64>,
}

/// Quality-focal loss of every cell/class score against the soft heatmap,
/// summed and divided by `max(N, 1)`.
pub fn classification_loss(
    assignment: &AssignmentResult,
    preds: &PredictionMap,
    gamma: f64,
) -> ClassificationLoss {
    let norm = 1.0 / assignment.n_positives().max(1) as f64;
    let (values, grad): (Vec<f64>, Vec<f64>) = assignment
        .heatmap
        .iter()
        .zip(preds.scores())
        .map(|(q, p)| {
            let (v, d) = quality_focal(*q, *p, gamma);
            (v, d * norm)
        })
        .unzip();
    ClassificationLoss {
        loss: pairwise_sum(&values) * norm,
        grad,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IouLoss {
    pub loss: f64,
    /// `dL/dconf` per positive cell, scaled by `1 / max(N, 1)`.
    pub grad: Vec<(CellIndex, f64)>,
}

/// Smooth-L1 between each positive's IoU-confidence and `2 IoU - 1`, where
/// IoU is the exact rotated IoU of the predicted box with its object. The
/// target is treated as a constant.
pub fn iou_prediction_loss(
    assignment: &AssignmentResult,
    preds: &PredictionMap,
    gts: &[GroundTruth],
) -> IouLoss {
    let norm = 1.0 / assignment.n_positives().max(1) as f64;
    let mut values = Vec::new();
    let mut grad = Vec::new();
    for a in &assignment.per_gt {
        let gt_box = &gts[a.gt_index].bbox;
        for cell in &a.positives {
            let iou = rotated_iou_pred(preds.box_at(*cell), gt_box).value();
            let (v, d) = smooth_l1(preds.conf(*cell) - (2.0 * iou - 1.0));
            values.push(v);
            grad.push((*cell, d * norm));
        }
    }
    IouLoss {
        loss: pairwise_sum(&values) * norm,
        grad,
    }
}
