//! Detection losses: per-sample regression loss, scene-level normalized
//! regression, quality-focal classification on soft heatmap targets, IoU
//! prediction, and the weighted total.

mod scene;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Alpha, BoxParams8};
use crate::grad::{regression_loss_and_grad, Grad8};

pub use scene::{
    classification_loss, iou_prediction_loss, regression_loss_scene, regression_loss_scene_by,
    ClassificationLoss, GtRegression, IouLoss, RegressionLoss,
};

pub const DEFAULT_GAMMA: f64 = 2.0;
/// Lower bound applied to the arguments of both logarithms in the focal term.
pub const PROB_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub lambda_cls: f64,
    pub lambda_reg: f64,
    pub lambda_iou: f64,
    pub alpha: Alpha,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_cls: 1.0,
            lambda_reg: 3.0,
            lambda_iou: 1.0,
            alpha: Alpha::DEFAULT,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_cls", self.lambda_cls),
            ("lambda_reg", self.lambda_reg),
            ("lambda_iou", self.lambda_iou),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Quality-focal term `-|q - p|^γ (q ln p + (1 - q) ln(1 - p))` and its
/// derivative in `p`. Log arguments are floored at [`PROB_EPS`]; the
/// modulating factor uses the raw `p`, so `p == q` contributes exactly 0.
pub fn quality_focal(q: f64, p: f64, gamma: f64) -> (f64, f64) {
    let diff = p - q;
    let m = if gamma == 0.0 { 1.0 } else { diff.abs().powf(gamma) };
    let dm = if gamma == 0.0 || diff == 0.0 {
        0.0
    } else {
        gamma * diff.abs().powf(gamma - 1.0) * diff.signum()
    };
    let (lp, lq) = (p.max(PROB_EPS), (1.0 - p).max(PROB_EPS));
    let ce = -(q * lp.ln() + (1.0 - q) * lq.ln());
    let dce_p = if p > PROB_EPS { -q / p } else { 0.0 };
    let dce_q = if 1.0 - p > PROB_EPS {
        (1.0 - q) / (1.0 - p)
    } else {
        0.0
    };
    let value = if m == 0.0 { 0.0 } else { m * ce };
    (value, dm * ce + m * (dce_p + dce_q))
}

/// Smooth-L1 with `β = 1` and its derivative.
pub fn smooth_l1(x: f64) -> (f64, f64) {
    if x.abs() < 1.0 {
        (0.5 * x * x, x)
    } else {
        (x.abs() - 0.5, x.signum())
    }
}

pub(crate) fn regression_loss_sample_unchecked(p: &BoxParams8, t: &BoxParams8, alpha: Alpha) -> f64 {
    regression_loss_and_grad(p, t, alpha).0
}

/// `1 - RWIoU + (D / Diag)²` for one prediction/target pair; lies in `[0, 2)`.
pub fn regression_loss_sample(pred: &BoxParams8, target: &BoxParams8, alpha: Alpha) -> Result<f64> {
    pred.validate()?;
    target.validate()?;
    Ok(regression_loss_sample_unchecked(pred, target, alpha))
}

/// Smooth-L1 on parameter residuals `(Δx, Δy, Δz, ln l_p/l_t, ln w_p/w_t,
/// ln h_p/h_t, Δs, Δc)`, summed over channels, with its gradient in the
/// 8-channel parameters.
pub fn smooth_l1_param_loss(p: &BoxParams8, t: &BoxParams8) -> (f64, Grad8) {
    let (pa, ta) = (p.to_array(), t.to_array());
    let mut loss = 0.0;
    let mut g = [0.0; 8];
    for i in 0..8 {
        let (res, scale) = if (3..6).contains(&i) {
            ((pa[i] / ta[i]).ln(), 1.0 / pa[i])
        } else {
            (pa[i] - ta[i], 1.0)
        };
        let (v, d) = smooth_l1(res);
        loss += v;
        g[i] = d * scale;
    }
    (loss, Grad8::from_array(g))
}

/// Weighted sum `λ_cls L_cls + λ_reg L_reg + λ_iou L_iou`.
pub fn total_loss(l_cls: f64, l_reg: f64, l_iou: f64, w: &LossWeights) -> f64 {
    w.lambda_cls * l_cls + w.lambda_reg * l_reg + w.lambda_iou * l_iou
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_cls: f64,
    pub l_reg: f64,
    pub l_iou: f64,
    pub total: f64,
    pub n_positives: usize,
    pub per_gt: Vec<GtRegression>,
    pub weights: LossWeights,
}

impl LossReport {
    pub fn assemble(cls: f64, reg: &RegressionLoss, iou: f64, weights: &LossWeights) -> Self {
        Self {
            l_cls: cls,
            l_reg: reg.loss,
            l_iou: iou,
            total: total_loss(cls, reg.loss, iou, weights),
            n_positives: reg.n_positives,
            per_gt: reg.per_gt.clone(),
            weights: *weights,
        }
    }

    /// Recomputes the total from the components.
    pub fn recomposed_total(&self) -> f64 {
        total_loss(self.l_cls, self.l_reg, self.l_iou, &self.weights)
    }
}
