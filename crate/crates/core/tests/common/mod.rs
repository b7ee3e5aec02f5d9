//! Shared fixtures for the integration tests: random scenes and a
//! brute-force reference assigner.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rwiou_core::assign::{AssignConfig, CellIndex, GridSpec, GroundTruth, PredictionMap};
use rwiou_core::geometry::rotated_iou_pred;
use rwiou_core::losses::{quality_focal, regression_loss_sample};
use rwiou_core::{Box3D, BoxParams8};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_box(rng: &mut impl Rng, span: f64) -> Box3D {
    Box3D::new(
        rng.random_range(-span..span),
        rng.random_range(-span..span),
        rng.random_range(-span..span),
        rng.random_range(0.2..5.0),
        rng.random_range(0.2..5.0),
        rng.random_range(0.2..5.0),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
    .unwrap()
}

/// Random box overlapping `b` in most draws.
pub fn near_box(rng: &mut impl Rng, b: &Box3D, jitter: f64) -> Box3D {
    Box3D::new(
        b.x + rng.random_range(-jitter..jitter),
        b.y + rng.random_range(-jitter..jitter),
        b.z + rng.random_range(-jitter..jitter) * 0.5,
        b.l * rng.random_range(0.6..1.5),
        b.w * rng.random_range(0.6..1.5),
        b.h * rng.random_range(0.6..1.5),
        b.theta + rng.random_range(-0.8..0.8),
    )
    .unwrap()
}

pub struct RandomScene {
    pub grid: GridSpec,
    pub gts: Vec<GroundTruth>,
    pub preds: PredictionMap,
}

/// Up to `max_side`×`max_side` grid with up to `max_gts` objects crowded
/// together so cross regions often collide, and predictions scattered
/// around the objects.
pub fn random_scene(rng: &mut impl Rng, max_side: usize, max_gts: usize) -> RandomScene {
    let n_rows = rng.random_range(1..=max_side);
    let n_cols = rng.random_range(1..=max_side);
    let cell = rng.random_range(0.3..1.5);
    let grid = GridSpec::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), cell, n_rows, n_cols)
        .unwrap();
    let n_classes = rng.random_range(1..=3);
    let n_gts = rng.random_range(0..=max_gts);
    // clustered centers force shared cells
    let cluster = rng.random_range(1.0..=(n_rows.max(n_cols) as f64));
    let (cx, cy) = (
        grid.x_min + rng.random_range(0.0..grid.x_max() - grid.x_min),
        grid.y_min + rng.random_range(0.0..grid.y_max() - grid.y_min),
    );
    let gts: Vec<GroundTruth> = (0..n_gts)
        .map(|_| {
            let x = (cx + rng.random_range(-0.5..0.5) * cluster * cell).clamp(grid.x_min, grid.x_max() - 1e-9);
            let y = (cy + rng.random_range(-0.5..0.5) * cluster * cell).clamp(grid.y_min, grid.y_max() - 1e-9);
            let b = Box3D::new(
                x,
                y,
                rng.random_range(0.0..2.0),
                rng.random_range(0.5..5.0),
                rng.random_range(0.5..2.5),
                rng.random_range(0.5..2.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
            .unwrap();
            GroundTruth::new(b, rng.random_range(0..n_classes))
        })
        .collect();

    let n = grid.n_cells();
    let mut boxes = Vec::with_capacity(n);
    for cell in grid.cells() {
        let b = if !gts.is_empty() && rng.random_bool(0.8) {
            let g = &gts[rng.random_range(0..gts.len())];
            near_box(rng, &g.bbox, 1.0)
        } else {
            let [x, y] = grid.cell_center(cell);
            Box3D::new(x, y, 1.0, 2.0, 1.0, 1.0, rng.random_range(0.0..3.0)).unwrap()
        };
        boxes.push(b.to_params());
    }
    let scores = (0..n * n_classes).map(|_| rng.random_range(0.0..1.0)).collect();
    let conf = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let preds = PredictionMap::new(grid, n_classes, boxes, scores, conf).unwrap();
    RandomScene { grid, gts, preds }
}

/// Output of the reference assigner.
#[derive(Debug, PartialEq)]
pub struct Reference {
    pub positives: Vec<Vec<CellIndex>>,
    pub owner: Vec<Option<usize>>,
    pub heatmap: Vec<f64>,
}

fn center_cell(grid: &GridSpec, b: &Box3D) -> CellIndex {
    let col = ((b.x - grid.x_min) / grid.cell_size).floor() as i64;
    let row = ((b.y - grid.y_min) / grid.cell_size).floor() as i64;
    CellIndex::new(
        row.clamp(0, grid.n_rows as i64 - 1) as usize,
        col.clamp(0, grid.n_cols as i64 - 1) as usize,
    )
}

/// Straight-from-the-definition assigner: scans every cell for every
/// object, with no shared code paths beyond the per-sample cost terms.
pub fn brute_force_assign(
    grid: &GridSpec,
    gts: &[GroundTruth],
    preds: &PredictionMap,
    cfg: &AssignConfig,
) -> Reference {
    let n_cells = grid.n_rows * grid.n_cols;
    let n_classes = preds.n_classes();
    let centers: Vec<CellIndex> = gts.iter().map(|g| center_cell(grid, &g.bbox)).collect();
    let in_region = |i: usize, row: usize, col: usize| {
        let c = centers[i];
        row.abs_diff(c.row) + col.abs_diff(c.col) <= cfg.r
    };
    let cost = |i: usize, row: usize, col: usize| {
        let cell = CellIndex::new(row, col);
        let g = &gts[i];
        let p: &BoxParams8 = preds.box_at(cell);
        quality_focal(1.0, preds.score(cell, g.class_id), cfg.gamma).0
            + cfg.lambda_reg * regression_loss_sample(p, &g.bbox.to_params(), cfg.alpha).unwrap()
    };
    let iou = |i: usize, row: usize, col: usize| {
        rotated_iou_pred(preds.box_at(CellIndex::new(row, col)), &gts[i].bbox).value()
    };

    let mut claimant = vec![None::<usize>; n_cells];
    for row in 0..grid.n_rows {
        for col in 0..grid.n_cols {
            let mut best: Option<(f64, usize)> = None;
            for i in 0..gts.len() {
                if !in_region(i, row, col) {
                    continue;
                }
                let c = cost(i, row, col);
                if best.is_none_or(|(b, _)| c < b) {
                    best = Some((c, i));
                }
            }
            claimant[row * grid.n_cols + col] = best.map(|(_, i)| i);
        }
    }

    let mut positives = Vec::new();
    let mut owner = vec![None; n_cells];
    let mut heatmap = vec![0.0; n_cells * n_classes];
    for i in 0..gts.len() {
        let mut mine = Vec::new();
        for row in 0..grid.n_rows {
            for col in 0..grid.n_cols {
                if in_region(i, row, col) {
                    let h = &mut heatmap[(row * grid.n_cols + col) * n_classes + gts[i].class_id];
                    *h = f64::max(*h, iou(i, row, col));
                    if claimant[row * grid.n_cols + col] == Some(i) {
                        mine.push((cost(i, row, col), row * grid.n_cols + col, row, col));
                    }
                }
            }
        }
        let mut sum = 0.0;
        for (_, _, row, col) in &mine {
            sum += iou(i, *row, *col);
        }
        let mut k = sum.floor() as usize;
        if k < 1 {
            k = 1;
        }
        if k > mine.len() {
            k = mine.len();
        }
        mine.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let chosen: Vec<CellIndex> = mine[..k].iter().map(|m| CellIndex::new(m.2, m.3)).collect();
        for c in &chosen {
            owner[c.row * grid.n_cols + c.col] = Some(i);
        }
        positives.push(chosen);
    }
    for (i, ps) in positives.iter().enumerate() {
        for c in ps {
            heatmap[(c.row * grid.n_cols + c.col) * n_classes + gts[i].class_id] = 1.0;
        }
    }
    Reference {
        positives,
        owner,
        heatmap,
    }
}

pub fn reference_of(result: &rwiou_core::assign::AssignmentResult) -> Reference {
    Reference {
        positives: result.per_gt.iter().map(|g| g.positives.clone()).collect(),
        owner: result.owner.clone(),
        heatmap: result.heatmap.clone(),
    }
}
