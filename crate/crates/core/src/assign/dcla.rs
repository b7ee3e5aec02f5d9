//! Dynamic cross label assignment.
//!
//! For each ground truth, the candidates are the grid cells within Manhattan
//! distance `r` of its center cell. Each candidate gets a selection cost
//! (classification loss on the object's class plus the weighted regression
//! loss), the number of positives `k` comes from the summed candidate IoUs,
//! and the `k` cheapest candidates become positives.
//!
//! A cell inside several cross regions is available only to the ground truth
//! with the lowest selection cost there (ties go to the lower index). Each
//! ground truth then computes `k` and picks its positives among the cells
//! available to it; it does not reach outside its cross region to replace
//! cells it lost.

use serde::{Deserialize, Serialize};

use super::grid::{CellIndex, GridSpec};
use super::types::{GroundTruth, PredictionMap};
use crate::error::Result;
use crate::geometry::{aabb_iou, rotated_iou_pred, rwiou_params, Alpha, Box3D, BoxParams8};
use crate::losses::{quality_focal, regression_loss_sample_unchecked, DEFAULT_GAMMA};

/// Which overlap measure drives dynamic `k` and the soft heatmap weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IouKind {
    #[default]
    Rotated,
    Rwiou,
    AxisAligned,
}

impl IouKind {
    /// Overlap of a predicted box with an object.
    pub fn eval(self, pred: &BoxParams8, gt: &Box3D, alpha: Alpha) -> f64 {
        match self {
            IouKind::Rotated => rotated_iou_pred(pred, gt).value(),
            IouKind::Rwiou => rwiou_params(pred, &gt.to_params(), alpha).value(),
            IouKind::AxisAligned => aabb_iou(&pred.to_box(), gt).value(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssignConfig {
    /// Manhattan radius of the cross region.
    pub r: usize,
    pub lambda_reg: f64,
    pub alpha: Alpha,
    /// Focusing exponent of the classification term in the selection cost.
    pub gamma: f64,
    pub iou: IouKind,
}

impl Default for AssignConfig {
    fn default() -> Self {
        Self {
            r: 1,
            lambda_reg: 3.0,
            alpha: Alpha::DEFAULT,
            gamma: DEFAULT_GAMMA,
            iou: IouKind::Rotated,
        }
    }
}

impl AssignConfig {
    pub fn with_r(mut self, r: usize) -> Self {
        self.r = r;
        self
    }
}

/// Selection cost of predicting `gt` from one cell:
/// `focal(1, score) + λ_reg · (1 - RWIoU + (D / Diag)²)`.
pub fn selection_cost(
    gt: &GroundTruth,
    pred_box: &BoxParams8,
    pred_score: f64,
    cfg: &AssignConfig,
) -> f64 {
    let cls = quality_focal(1.0, pred_score, cfg.gamma).0;
    let reg = regression_loss_sample_unchecked(pred_box, &gt.bbox.to_params(), cfg.alpha);
    cls + cfg.lambda_reg * reg
}

/// `max(⌊Σ IoU⌋, 1)`, capped at the number of candidates when there are any.
pub fn dynamic_k_from_ious(ious: &[f64]) -> usize {
    let sum: f64 = ious.iter().sum();
    let k = (sum.floor() as usize).max(1);
    if ious.is_empty() {
        k
    } else {
        k.min(ious.len())
    }
}

pub fn dynamic_k(gt: &GroundTruth, candidates: &[BoxParams8], cfg: &AssignConfig) -> usize {
    let ious: Vec<f64> = candidates
        .iter()
        .map(|b| cfg.iou.eval(b, &gt.bbox, cfg.alpha))
        .collect();
    dynamic_k_from_ious(&ious)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtAssignment {
    pub gt_index: usize,
    pub class_id: usize,
    pub center: CellIndex,
    pub region_size: usize,
    /// Positive cells, cheapest first.
    pub positives: Vec<CellIndex>,
    /// Set when every cell of the cross region went to other ground truths.
    pub unassigned: bool,
}

impl GtAssignment {
    pub fn k(&self) -> usize {
        self.positives.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    pub grid: GridSpec,
    pub n_classes: usize,
    pub r: usize,
    pub per_gt: Vec<GtAssignment>,
    /// Owning ground truth of each positive cell (row-major).
    pub owner: Vec<Option<usize>>,
    /// Cell-major soft classification targets, `n_cells * n_classes`.
    pub heatmap: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapEntry {
    pub cell: CellIndex,
    pub class_id: usize,
    pub weight: f64,
}

/// Serialized form: positives as `[row, col]` pairs and only the nonzero
/// heatmap weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentDump {
    pub grid: GridSpec,
    pub n_classes: usize,
    pub r: usize,
    pub n_positives: usize,
    pub gts: Vec<GtDump>,
    pub heatmap: Vec<HeatmapEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtDump {
    pub gt_index: usize,
    pub class_id: usize,
    pub center: CellIndex,
    pub k: usize,
    pub positives: Vec<CellIndex>,
    pub unassigned: bool,
}

impl AssignmentResult {
    pub fn n_positives(&self) -> usize {
        self.per_gt.iter().map(GtAssignment::k).sum()
    }

    pub fn weight(&self, cell: CellIndex, class_id: usize) -> f64 {
        self.heatmap[self.grid.linear(cell) * self.n_classes + class_id]
    }

    pub fn owner_of(&self, cell: CellIndex) -> Option<usize> {
        self.owner[self.grid.linear(cell)]
    }

    pub fn unassigned(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_gt.iter().filter(|g| g.unassigned).map(|g| g.gt_index)
    }

    pub fn dump(&self) -> AssignmentDump {
        let heatmap = self
            .heatmap
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, w)| HeatmapEntry {
                cell: self.grid.cell_at(i / self.n_classes),
                class_id: i % self.n_classes,
                weight: *w,
            })
            .collect();
        AssignmentDump {
            grid: self.grid,
            n_classes: self.n_classes,
            r: self.r,
            n_positives: self.n_positives(),
            gts: self
                .per_gt
                .iter()
                .map(|g| GtDump {
                    gt_index: g.gt_index,
                    class_id: g.class_id,
                    center: g.center,
                    k: g.k(),
                    positives: g.positives.clone(),
                    unassigned: g.unassigned,
                })
                .collect(),
            heatmap,
        }
    }
}

struct Candidate {
    cell: CellIndex,
    linear: usize,
    cost: f64,
    iou: f64,
}

/// Runs dynamic cross label assignment over the whole scene.
pub fn assign_dcla(
    grid: &GridSpec,
    gts: &[GroundTruth],
    preds: &PredictionMap,
    cfg: &AssignConfig,
) -> Result<AssignmentResult> {
    let n_classes = preds.n_classes();
    let n_cells = grid.n_cells();

    let mut regions = Vec::with_capacity(gts.len());
    for gt in gts {
        let center = grid.world_to_cell(gt.bbox.x, gt.bbox.y)?;
        let cands: Vec<Candidate> = grid
            .cross_region(center, cfg.r)
            .into_iter()
            .map(|cell| {
                let pb = preds.box_at(cell);
                Candidate {
                    cell,
                    linear: grid.linear(cell),
                    cost: selection_cost(gt, pb, preds.score(cell, gt.class_id), cfg),
                    iou: cfg.iou.eval(pb, &gt.bbox, cfg.alpha),
                }
            })
            .collect();
        regions.push((center, cands));
    }

    // cheapest claimant per cell; strict `<` keeps the lower index on ties
    let mut claim: Vec<Option<(f64, usize)>> = vec![None; n_cells];
    for (i, (_, cands)) in regions.iter().enumerate() {
        for c in cands {
            match claim[c.linear] {
                Some((best, _)) if c.cost >= best => {}
                _ => claim[c.linear] = Some((c.cost, i)),
            }
        }
    }

    let mut owner = vec![None; n_cells];
    let mut heatmap = vec![0.0f64; n_cells * n_classes];
    let mut per_gt = Vec::with_capacity(gts.len());
    for (i, (gt, (center, cands))) in gts.iter().zip(&regions).enumerate() {
        let mut available: Vec<&Candidate> = cands
            .iter()
            .filter(|c| matches!(claim[c.linear], Some((_, j)) if j == i))
            .collect();
        // k is summed in row-major order, before ranking
        let ious: Vec<f64> = available.iter().map(|c| c.iou).collect();
        available.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.linear.cmp(&b.linear)));
        let positives: Vec<CellIndex> = if available.is_empty() {
            Vec::new()
        } else {
            let k = dynamic_k_from_ious(&ious);
            available[..k].iter().map(|c| c.cell).collect()
        };
        for p in &positives {
            owner[grid.linear(*p)] = Some(i);
        }
        for c in cands {
            let w = &mut heatmap[c.linear * n_classes + gt.class_id];
            *w = w.max(c.iou);
        }
        per_gt.push(GtAssignment {
            gt_index: i,
            class_id: gt.class_id,
            center: *center,
            region_size: cands.len(),
            unassigned: positives.is_empty(),
            positives,
        });
    }
    for g in &per_gt {
        for p in &g.positives {
            heatmap[grid.linear(*p) * n_classes + g.class_id] = 1.0;
        }
    }

    Ok(AssignmentResult {
        grid: *grid,
        n_classes,
        r: cfg.r,
        per_gt,
        owner,
        heatmap,
    })
}

/// Center-based assignment: only each object's center cell is positive.
pub fn assign_center(
    grid: &GridSpec,
    gts: &[GroundTruth],
    preds: &PredictionMap,
    cfg: &AssignConfig,
) -> Result<AssignmentResult> {
    let n_classes = preds.n_classes();
    let centers = gts
        .iter()
        .map(|g| grid.world_to_cell(g.bbox.x, g.bbox.y))
        .collect::<Result<Vec<_>>>()?;
    let pick = |i: usize| {
        let pb = preds.box_at(centers[i]);
        let gt = &gts[i];
        let cost = selection_cost(gt, pb, preds.score(centers[i], gt.class_id), cfg);
        (cost, cfg.iou.eval(pb, &gt.bbox, cfg.alpha))
    };
    let scored: Vec<(f64, f64)> = (0..gts.len()).map(pick).collect();

    // objects sharing a center cell: the cheapest wins, lower index on ties
    let winner = |i: usize| {
        (0..gts.len())
            .filter(|j| centers[*j] == centers[i])
            .min_by(|a, b| scored[*a].0.total_cmp(&scored[*b].0).then(a.cmp(b)))
            == Some(i)
    };

    let mut owner = vec![None; grid.n_cells()];
    let mut heatmap = vec![0.0f64; grid.n_cells() * n_classes];
    let mut per_gt = Vec::with_capacity(gts.len());
    for (i, gt) in gts.iter().enumerate() {
        let lin = grid.linear(centers[i]);
        let w = &mut heatmap[lin * n_classes + gt.class_id];
        *w = w.max(scored[i].1);
        let won = winner(i);
        if won {
            owner[lin] = Some(i);
        }
        per_gt.push(GtAssignment {
            gt_index: i,
            class_id: gt.class_id,
            center: centers[i],
            region_size: 1,
            positives: if won { vec![centers[i]] } else { Vec::new() },
            unassigned: !won,
        });
    }
    for g in &per_gt {
        for p in &g.positives {
            heatmap[grid.linear(*p) * n_classes + g.class_id] = 1.0;
        }
    }
    Ok(AssignmentResult {
        grid: *grid,
        n_classes,
        r: 0,
        per_gt,
        owner,
        heatmap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(0.0, 0.0, 1.0, 9, 9).unwrap()
    }

    fn car(x: f64, y: f64) -> GroundTruth {
        GroundTruth::new(Box3D::new(x, y, 0.8, 4.0, 2.0, 1.6, 0.3).unwrap(), 0)
    }

    fn preds_copying(g: &GridSpec, gt: &GroundTruth, score: f64) -> PredictionMap {
        PredictionMap::uniform(*g, 1, gt.bbox.to_params(), score).unwrap()
    }

    #[test]
    fn dynamic_k_examples() {
        assert_eq!(dynamic_k_from_ious(&[0.7, 0.6, 0.3, 0.1]), 1);
        assert_eq!(dynamic_k_from_ious(&[0.9, 0.8, 0.7]), 2);
        assert_eq!(dynamic_k_from_ious(&[0.0, 0.0, 0.0]), 1);
        assert_eq!(dynamic_k_from_ious(&[0.9; 5]), 4);
        assert_eq!(dynamic_k_from_ious(&[1.0; 3]), 3);
        assert_eq!(dynamic_k_from_ious(&[]), 1);
    }

    #[test]
    fn dynamic_k_on_boxes_uses_configured_iou() {
        let gt = car(4.5, 4.5);
        let same = gt.bbox.to_params();
        let cfg = AssignConfig::default();
        assert_eq!(dynamic_k(&gt, &[same; 3], &cfg), 3);
        assert_eq!(dynamic_k(&gt, &[], &cfg), 1);
    }

    #[test]
    fn selection_cost_perfect_and_linear() {
        let gt = car(4.5, 4.5);
        let cfg = AssignConfig::default();
        assert_eq!(selection_cost(&gt, &gt.bbox.to_params(), 1.0, &cfg), 0.0);
        let off = BoxParams8 { x: 5.0, ..gt.bbox.to_params() };
        let c1 = selection_cost(&gt, &off, 0.4, &AssignConfig { lambda_reg: 1.0, ..cfg });
        let c2 = selection_cost(&gt, &off, 0.4, &AssignConfig { lambda_reg: 2.0, ..cfg });
        let reg = regression_loss_sample_unchecked(&off, &gt.bbox.to_params(), cfg.alpha);
        assert!((c2 - c1 - reg).abs() < 1e-15);
    }

    #[test]
    fn center_degeneration_single_positive() {
        let g = grid();
        let gt = car(4.5, 4.5);
        let preds = preds_copying(&g, &gt, 0.5);
        let res = assign_dcla(&g, &[gt], &preds, &AssignConfig::default().with_r(0)).unwrap();
        assert_eq!(res.per_gt[0].positives, vec![CellIndex::new(4, 4)]);
        assert_eq!(res.n_positives(), 1);
        assert_eq!(res.weight(CellIndex::new(4, 4), 0), 1.0);
        assert_eq!(res.weight(CellIndex::new(4, 5), 0), 0.0);
    }

    #[test]
    fn k_four_of_five_when_all_iou_point_nine() {
        // Shrink every candidate's length so that IoU with the gt is 0.9 and
        // vary the score so that the cost order is known.
        let g = grid();
        let gt = car(4.5, 4.5);
        let t = gt.bbox.to_params();
        let mut preds = preds_copying(&g, &gt, 0.5);
        let scores = [(3, 4, 0.9), (4, 3, 0.3), (4, 4, 0.8), (4, 5, 0.7), (5, 4, 0.6)];
        for (r, c, s) in scores {
            let cell = CellIndex::new(r, c);
            preds.set_box(cell, BoxParams8 { l: t.l * 0.9, ..t }).unwrap();
            preds.set_score(cell, 0, s).unwrap();
        }
        let res = assign_dcla(&g, &[gt], &preds, &AssignConfig::default()).unwrap();
        let a = &res.per_gt[0];
        assert_eq!(a.k(), 4);
        assert_eq!(
            a.positives,
            vec![
                CellIndex::new(3, 4),
                CellIndex::new(4, 4),
                CellIndex::new(4, 5),
                CellIndex::new(5, 4)
            ]
        );
        // the rejected candidate keeps its IoU as soft weight
        assert!((res.weight(CellIndex::new(4, 3), 0) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn contested_cell_goes_to_cheaper_gt() {
        let g = grid();
        let a = car(2.5, 4.5);
        let b = GroundTruth::new(Box3D::new(4.5, 4.5, 0.8, 1.0, 1.0, 1.6, 0.0).unwrap(), 0);
        // cell (4,3) lies in both r=1 regions; make it predict gt `b` exactly
        let mut preds = preds_copying(&g, &a, 0.5);
        preds.set_box(CellIndex::new(4, 3), b.bbox.to_params()).unwrap();
        preds.set_box(CellIndex::new(4, 4), b.bbox.to_params()).unwrap();
        let res = assign_dcla(&g, &[a, b], &preds, &AssignConfig::default()).unwrap();
        assert_eq!(res.owner_of(CellIndex::new(4, 3)), Some(1));
        assert!(!res.per_gt[0].positives.contains(&CellIndex::new(4, 3)));
    }

    #[test]
    fn shared_center_flags_one_gt() {
        let g = grid();
        let a = car(4.2, 4.2);
        let b = car(4.7, 4.7);
        let preds = preds_copying(&g, &a, 0.5);
        let res = assign_center(&g, &[a, b], &preds, &AssignConfig::default()).unwrap();
        assert_eq!(res.n_positives(), 1);
        assert_eq!(res.unassigned().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn off_grid_gt_is_an_error() {
        let g = grid();
        let preds = preds_copying(&g, &car(1.0, 1.0), 0.5);
        assert!(assign_dcla(&g, &[car(40.0, 1.0)], &preds, &AssignConfig::default()).is_err());
    }

    #[test]
    fn dump_is_sparse_and_round_trips() {
        let g = grid();
        let gt = car(4.5, 4.5);
        let preds = preds_copying(&g, &gt, 0.5);
        let res = assign_dcla(&g, &[gt], &preds, &AssignConfig::default()).unwrap();
        let dump = res.dump();
        assert_eq!(dump.heatmap.len(), 5);
        let text = serde_json::to_string(&dump).unwrap();
        assert!(text.contains("\"positives\":[["));
        let back: AssignmentDump = serde_json::from_str(&text).unwrap();
        assert_eq!(back, dump);
    }
}
