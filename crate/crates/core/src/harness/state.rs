use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::assign::{AssignmentResult, CellIndex, GridSpec, GroundTruth, PredictionMap};
use crate::error::{Error, Result};
use crate::geometry::BoxParams8;
use crate::reduce::pairwise_sum;

/// Logit used to pin a score at exactly 0 or 1 in `f64`.
pub const SATURATED_LOGIT: f64 = 50.0;
/// Initial logit for noisy and random starts (score ≈ 0.12).
pub const INITIAL_LOGIT: f64 = -2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitKind {
    /// Cells near each object predict it exactly and scores match the
    /// assignment targets, so every loss term is zero.
    Exact,
    /// Cells near each object predict it with Gaussian noise on center,
    /// yaw and log-extents.
    Noisy {
        pos_sigma: f64,
        yaw_sigma: f64,
        log_size_sigma: f64,
    },
    /// Every cell predicts a mean-size box at its own center with random yaw.
    Random,
}

impl Default for InitKind {
    fn default() -> Self {
        InitKind::Noisy {
            pos_sigma: 0.3,
            yaw_sigma: 0.2,
            log_size_sigma: 0.1,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Free per-cell parameters standing in for a network's output maps.
/// Extents are stored as logarithms so decoded sizes are always positive.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub grid: GridSpec,
    pub n_classes: usize,
    /// `(x, y, z, ln l, ln w, ln h, s, c)` per cell.
    pub params: Vec<[f64; 8]>,
    /// Cell-major classification logits.
    pub logits: Vec<f64>,
    pub iou_conf: Vec<f64>,
    pub step: usize,
    pub seed: u64,
}

pub(crate) fn encode(b: &BoxParams8) -> [f64; 8] {
    [b.x, b.y, b.z, b.l.ln(), b.w.ln(), b.h.ln(), b.s, b.c]
}

fn decode_box(p: &[f64; 8]) -> BoxParams8 {
    BoxParams8 {
        x: p[0],
        y: p[1],
        z: p[2],
        l: p[3].exp(),
        w: p[4].exp(),
        h: p[5].exp(),
        s: p[6],
        c: p[7],
    }
}

impl TrainState {
    pub fn box_at(&self, linear: usize) -> BoxParams8 {
        decode_box(&self.params[linear])
    }

    pub fn decode(&self) -> Result<PredictionMap> {
        PredictionMap::new(
            self.grid,
            self.n_classes,
            self.params.iter().map(decode_box).collect(),
            self.logits.iter().map(|z| sigmoid(*z)).collect(),
            self.iou_conf.clone(),
        )
    }

    /// Builds the initial state. Cells within Manhattan distance
    /// `init_radius` of an object's center cell take that object (the
    /// nearest one, lower index on ties); all others get a background box.
    pub fn initialize(
        grid: &GridSpec,
        gts: &[GroundTruth],
        n_classes: usize,
        background_size: [f64; 3],
        init: InitKind,
        init_radius: usize,
        seed: u64,
    ) -> Result<Self> {
        if background_size.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(Error::InvalidConfig("background box size must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let centers = gts
            .iter()
            .map(|g| grid.world_to_cell(g.bbox.x, g.bbox.y))
            .collect::<Result<Vec<_>>>()?;

        let mut params = Vec::with_capacity(grid.n_cells());
        for cell in grid.cells() {
            let nearest = centers
                .iter()
                .enumerate()
                .map(|(i, c)| (c.manhattan(&cell), i))
                .filter(|(d, _)| *d <= init_radius)
                .min();
            let [cx, cy] = grid.cell_center(cell);
            let background = |theta: f64| BoxParams8 {
                x: cx,
                y: cy,
                z: 0.5 * background_size[2],
                l: background_size[0],
                w: background_size[1],
                h: background_size[2],
                s: theta.sin(),
                c: theta.cos(),
            };
            let b = match (init, nearest) {
                (InitKind::Random, _) => background(rng.random_range(0.0..std::f64::consts::TAU)),
                (_, None) => background(0.0),
                (InitKind::Exact, Some((_, i))) => gts[i].bbox.to_params(),
                (
                    InitKind::Noisy {
                        pos_sigma,
                        yaw_sigma,
                        log_size_sigma,
                    },
                    Some((_, i)),
                ) => {
                    let g = &gts[i].bbox;
                    let mut n = |sigma: f64| -> Result<f64> {
                        Ok(Normal::new(0.0, sigma)
                            .map_err(|e| Error::InvalidConfig(format!("noise sigma {sigma}: {e}")))?
                            .sample(&mut rng))
                    };
                    let theta = g.theta + n(yaw_sigma)?;
                    BoxParams8 {
                        x: g.x + n(pos_sigma)?,
                        y: g.y + n(pos_sigma)?,
                        z: g.z + n(pos_sigma)?,
                        l: g.l * n(log_size_sigma)?.exp(),
                        w: g.w * n(log_size_sigma)?.exp(),
                        h: g.h * n(log_size_sigma)?.exp(),
                        s: theta.sin(),
                        c: theta.cos(),
                    }
                }
            };
            params.push(encode(&b));
        }

        let logit = match init {
            InitKind::Exact => -SATURATED_LOGIT,
            _ => INITIAL_LOGIT,
        };
        Ok(Self {
            grid: *grid,
            n_classes,
            params,
            logits: vec![logit; grid.n_cells() * n_classes],
            iou_conf: vec![0.0; grid.n_cells()],
            step: 0,
            seed,
        })
    }

    /// Saturates scores and confidences to match an assignment whose
    /// positives predict their objects exactly.
    pub(crate) fn pin_to_assignment(&mut self, assignment: &AssignmentResult) {
        for (z, q) in self.logits.iter_mut().zip(&assignment.heatmap) {
            *z = if *q == 1.0 {
                SATURATED_LOGIT
            } else {
                -SATURATED_LOGIT
            };
        }
        for g in &assignment.per_gt {
            for cell in &g.positives {
                let i = self.grid.linear(*cell);
                self.iou_conf[i] = 1.0;
            }
        }
    }

    pub fn cell(&self, cell: CellIndex) -> BoxParams8 {
        self.box_at(self.grid.linear(cell))
    }
}

pub(crate) fn score_from_logit(z: f64) -> f64 {
    sigmoid(z)
}

/// Mean object extents, or unit extents for an empty scene.
pub(crate) fn mean_extents(gts: &[GroundTruth]) -> [f64; 3] {
    if gts.is_empty() {
        return [1.0; 3];
    }
    std::array::from_fn(|k| {
        let v: Vec<f64> = gts.iter().map(|g| g.bbox.extents()[k]).collect();
        pairwise_sum(&v) / v.len() as f64
    })
}

/// Prediction map as a fit would start from it: cells within
/// `init_radius` of an object copy it (perturbed for noisy init), the rest
/// hold a mean-size background box.
pub fn synthetic_predictions(
    grid: &GridSpec,
    gts: &[GroundTruth],
    n_classes: usize,
    init: InitKind,
    init_radius: usize,
    seed: u64,
) -> Result<PredictionMap> {
    TrainState::initialize(grid, gts, n_classes, mean_extents(gts), init, init_radius, seed)?.decode()
}
