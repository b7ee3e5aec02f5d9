use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scene::{generate_scene, SceneConfig};
use super::state::{mean_extents, score_from_logit, InitKind, TrainState};
use crate::assign::{
    assign_center, assign_dcla, AssignConfig, AssignmentResult, GridSpec, GroundTruth, IouKind, PredictionMap,
};
use crate::error::{Error, Result};
use crate::geometry::rotated_iou_pred;
use crate::grad::Grad8;
use crate::losses::{
    classification_loss, iou_prediction_loss, regression_loss_scene, regression_loss_scene_by,
    smooth_l1_param_loss, LossWeights, RegressionLoss, DEFAULT_GAMMA,
};
use crate::reduce::pairwise_sum;

/// Total loss above which a run is aborted.
pub const DIVERGENCE_LIMIT: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AssignerKind {
    Dcla { r: usize },
    Center,
}

impl AssignerKind {
    pub fn radius(self) -> usize {
        match self {
            AssignerKind::Dcla { r } => r,
            AssignerKind::Center => 0,
        }
    }
}

impl Default for AssignerKind {
    fn default() -> Self {
        AssignerKind::Dcla { r: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionKind {
    #[default]
    Rwiou,
    SmoothL1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub step_size: f64,
    pub n_steps: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step_size: 0.05,
            n_steps: 500,
        }
    }
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

/// Everything that controls a single fit apart from the scene itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSetup {
    #[serde(default)]
    pub weights: LossWeights,
    #[serde(default)]
    pub assigner: AssignerKind,
    #[serde(default)]
    pub regression: RegressionKind,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub init: InitKind,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// IoU flavor used for dynamic k.
    #[serde(default)]
    pub iou: IouKind,
}

impl Default for FitSetup {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            assigner: AssignerKind::default(),
            regression: RegressionKind::default(),
            optimizer: OptimizerConfig::default(),
            init: InitKind::default(),
            gamma: DEFAULT_GAMMA,
            iou: IouKind::default(),
        }
    }
}

impl FitSetup {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        let o = &self.optimizer;
        if !(o.step_size > 0.0 && o.step_size.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step_size must be positive, got {}",
                o.step_size
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn assign_config(&self) -> AssignConfig {
        AssignConfig {
            r: self.assigner.radius(),
            lambda_reg: self.weights.lambda_reg,
            alpha: self.weights.alpha,
            gamma: self.gamma,
            iou: self.iou,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub l_cls: f64,
    pub l_reg: f64,
    pub l_iou: f64,
    pub total: f64,
    pub mean_true_iou: f64,
    pub n_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class_id: usize,
    pub n_gts: usize,
    pub mean_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceInfo {
    pub step: usize,
    pub loss: f64,
    pub l_cls: f64,
    pub l_reg: f64,
    pub l_iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub n_gts: usize,
    pub steps: Vec<StepRecord>,
    /// Final true IoU of each object (mean over its positives).
    pub final_gt_ious: Vec<f64>,
    pub final_mean_iou: f64,
    pub final_min_iou: f64,
    pub per_class: Vec<ClassStats>,
    pub final_k: Vec<usize>,
    pub diverged: Option<DivergenceInfo>,
    pub wall_clock_secs: f64,
}

impl ExperimentReport {
    pub fn final_loss(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.total)
    }

    /// Copy with the timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_clock_secs: 0.0,
            ..self.clone()
        }
    }
}

/// Mean rotated IoU of each object's positives against the object.
pub fn per_gt_true_iou(
    assignment: &AssignmentResult,
    preds: &PredictionMap,
    gts: &[GroundTruth],
) -> Vec<f64> {
    assignment
        .per_gt
        .iter()
        .map(|a| {
            if a.positives.is_empty() {
                return 0.0;
            }
            let gt = &gts[a.gt_index].bbox;
            let ious: Vec<f64> = a
                .positives
                .iter()
                .map(|c| rotated_iou_pred(preds.box_at(*c), gt).value())
                .collect();
            pairwise_sum(&ious) / ious.len() as f64
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        pairwise_sum(v) / v.len() as f64
    }
}

pub fn class_stats(assignment: &AssignmentResult, n_classes: usize) -> Vec<ClassStats> {
    (0..n_classes)
        .map(|class_id| {
            let ks: Vec<f64> = assignment
                .per_gt
                .iter()
                .filter(|a| a.class_id == class_id)
                .map(|a| a.k() as f64)
                .collect();
            ClassStats {
                class_id,
                n_gts: ks.len(),
                mean_k: mean(&ks),
            }
        })
        .collect()
}

fn run_assigner(
    kind: AssignerKind,
    grid: &GridSpec,
    gts: &[GroundTruth],
    preds: &PredictionMap,
    cfg: &AssignConfig,
) -> Result<AssignmentResult> {
    match kind {
        AssignerKind::Dcla { .. } => assign_dcla(grid, gts, preds, cfg),
        AssignerKind::Center => assign_center(grid, gts, preds, cfg),
    }
}

struct Evaluated {
    assignment: AssignmentResult,
    preds: PredictionMap,
    record: StepRecord,
    reg: RegressionLoss,
    cls_grad: Vec<f64>,
    iou_grad: Vec<(crate::assign::CellIndex, f64)>,
}

fn evaluate(
    state: &TrainState,
    gts: &[GroundTruth],
    setup: &FitSetup,
    cfg: &AssignConfig,
) -> Result<Evaluated> {
    let preds = state.decode()?;
    let assignment = run_assigner(setup.assigner, &state.grid, gts, &preds, cfg)?;
    let reg = match setup.regression {
        RegressionKind::Rwiou => regression_loss_scene(&assignment, &preds, gts, setup.weights.alpha),
        RegressionKind::SmoothL1 => {
            regression_loss_scene_by(&assignment, &preds, gts, smooth_l1_param_loss)
        }
    };
    let cls = classification_loss(&assignment, &preds, setup.gamma);
    let iou = iou_prediction_loss(&assignment, &preds, gts);
    let w = &setup.weights;
    let total = w.lambda_cls * cls.loss + w.lambda_reg * reg.loss + w.lambda_iou * iou.loss;
    let record = StepRecord {
        step: state.step,
        l_cls: cls.loss,
        l_reg: reg.loss,
        l_iou: iou.loss,
        total,
        mean_true_iou: mean(&per_gt_true_iou(&assignment, &preds, gts)),
        n_positives: assignment.n_positives(),
    };
    Ok(Evaluated {
        assignment,
        preds,
        record,
        reg,
        cls_grad: cls.grad,
        iou_grad: iou.grad,
    })
}

fn apply_update(
    state: &mut TrainState,
    ev: &Evaluated,
    gts: &[GroundTruth],
    setup: &FitSetup,
) {
    let lr = setup.optimizer.step_size;
    let w = &setup.weights;
    for ((cell, g), owner) in ev
        .reg
        .grads
        .iter()
        .zip(ev.assignment.per_gt.iter().flat_map(|a| a.positives.iter().map(move |_| a.gt_index)))
    {
        let i = state.grid.linear(*cell);
        let b = state.box_at(i);
        let target = gts[owner].bbox.to_params();
        let mut g: Grad8 = *g * w.lambda_reg;
        // Extents live in log space.
        g.d_l *= b.l;
        g.d_w *= b.w;
        g.d_h *= b.h;
        if b.s == target.s {
            g.d_s = 0.0;
        }
        if b.c == target.c {
            g.d_c = 0.0;
        }
        let p = &mut state.params[i];
        for (v, d) in p.iter_mut().zip(g.to_array()) {
            *v -= lr * d;
        }
    }
    for (z, d) in state.logits.iter_mut().zip(&ev.cls_grad) {
        let p = score_from_logit(*z);
        *z -= lr * w.lambda_cls * d * p * (1.0 - p);
    }
    for (cell, d) in &ev.iou_grad {
        let i = state.grid.linear(*cell);
        state.iou_conf[i] -= lr * w.lambda_iou * d;
    }
    state.step += 1;
}

/// Fits free per-cell parameters to a scene by plain gradient descent on
/// the full detection loss, re-running the assigner at every step.
///
/// A run whose total loss exceeds [`DIVERGENCE_LIMIT`] or turns non-finite
/// stops early with `diverged` set; the trajectory up to that step is kept.
pub fn fit_scene(
    gts: &[GroundTruth],
    grid: &GridSpec,
    n_classes: usize,
    setup: &FitSetup,
    seed: u64,
) -> Result<ExperimentReport> {
    setup.validate()?;
    if let Some(g) = gts.iter().find(|g| g.class_id >= n_classes) {
        return Err(Error::InvalidConfig(format!(
            "class id {} out of range for {n_classes} classes",
            g.class_id
        )));
    }
    let started = Instant::now();
    let cfg = setup.assign_config();
    let init_radius = match setup.init {
        InitKind::Exact => cfg.r,
        _ => cfg.r.max(1),
    };
    let mut state = TrainState::initialize(
        grid,
        gts,
        n_classes,
        mean_extents(gts),
        setup.init,
        init_radius,
        seed,
    )?;
    if setup.init == InitKind::Exact {
        let preds = state.decode()?;
        let a = run_assigner(setup.assigner, grid, gts, &preds, &cfg)?;
        state.pin_to_assignment(&a);
    }

    let mut steps = Vec::with_capacity(setup.optimizer.n_steps + 1);
    let mut diverged = None;
    let last = loop {
        let ev = evaluate(&state, gts, setup, &cfg)?;
        let rec = ev.record.clone();
        steps.push(rec.clone());
        if !rec.total.is_finite() || rec.total > DIVERGENCE_LIMIT {
            diverged = Some(DivergenceInfo {
                step: rec.step,
                loss: rec.total,
                l_cls: rec.l_cls,
                l_reg: rec.l_reg,
                l_iou: rec.l_iou,
            });
            break ev;
        }
        if state.step >= setup.optimizer.n_steps {
            break ev;
        }
        apply_update(&mut state, &ev, gts, setup);
    };

    let final_gt_ious = per_gt_true_iou(&last.assignment, &last.preds, gts);
    let final_min_iou = final_gt_ious.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ExperimentReport {
        seed,
        n_gts: gts.len(),
        steps,
        final_mean_iou: mean(&final_gt_ious),
        final_min_iou: if gts.is_empty() { 0.0 } else { final_min_iou },
        per_class: class_stats(&last.assignment, n_classes),
        final_k: last.assignment.per_gt.iter().map(|a| a.k()).collect(),
        final_gt_ious,
        diverged,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

/// Generates the scene for `seed` and fits it.
pub fn fit_seed(scene: &SceneConfig, setup: &FitSetup, seed: u64) -> Result<ExperimentReport> {
    let (gts, grid) = generate_scene(&scene.with_seed(seed))?;
    fit_scene(&gts, &grid, scene.n_classes(), setup, seed)
}

/// Runs one fit per seed in parallel; results keep the order of `seeds`.
pub fn run_seeds(scene: &SceneConfig, setup: &FitSetup, seeds: &[u64]) -> Result<Vec<ExperimentReport>> {
    seeds.par_iter().map(|s| fit_seed(scene, setup, *s)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub scene: SceneConfig,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub fit: FitSetup,
    /// Where trajectories and the report are written.
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Pass threshold on the mean final IoU across seeds.
    #[serde(default)]
    pub min_mean_iou: Option<f64>,
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.fit.validate()?;
        self.scene.grid.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        Ok(())
    }

    pub fn run(&self) -> Result<Vec<ExperimentReport>> {
        self.validate()?;
        run_seeds(&self.scene, &self.fit, &self.seeds)
    }
}

/// Mean of the final mean IoU over a batch of runs.
pub fn mean_final_iou(reports: &[ExperimentReport]) -> f64 {
    let v: Vec<f64> = reports.iter().map(|r| r.final_mean_iou).collect();
    mean(&v)
}
